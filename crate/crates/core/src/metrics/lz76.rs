//! LZ76 production-complexity and its shuffle-normalized form.
//!
//! The complexity of a string is the number of phrases in its exhaustive
//! production history: repeatedly take the shortest prefix of the remaining
//! suffix that has not occurred before (occurrences may overlap the phrase
//! itself), plus one final phrase if the tail is exhausted while still
//! matching history.
//!
//! The parse is driven by the longest-previous-factor table, computed from a
//! suffix array so that recording-scale strings stay cheap. The naive
//! two-pointer scan of the original formulation is kept in the tests as an
//! independent oracle.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Reusable buffers for the suffix-array machinery; one per thread so
/// repeated complexity evaluations stop paying allocation and page-zeroing
/// costs.
#[derive(Default)]
struct Workspace {
    sa: Vec<u32>,
    rank: Vec<u32>,
    new_rank: Vec<u32>,
    by_second: Vec<u32>,
    cnt: Vec<u32>,
    lcp: Vec<u32>,
    lpf: Vec<u32>,
}

thread_local! {
    static WORKSPACE: std::cell::RefCell<Workspace> = std::cell::RefCell::new(Workspace::default());
}

/// Suffix array by prefix doubling with counting sorts; O(n log n). Only the
/// live rank range of the count table is touched each level, which matters
/// for strings whose ranks converge slowly (sparse spike trains).
fn suffix_array(s: &[u8], ws: &mut Workspace) {
    let n = s.len();
    ws.sa.clear();
    ws.sa.extend(0..n as u32);
    if n == 0 {
        return;
    }
    // ranks start at 1; 0 is reserved for "past the end"
    ws.rank.clear();
    ws.rank.extend(s.iter().map(|&b| b as u32 + 1));
    ws.new_rank.resize(n, 0);
    ws.by_second.resize(n, 0);
    ws.cnt.resize(n.max(257) + 2, 0);

    // initial sort by single symbol
    let mut max_rank = 257usize;
    ws.cnt[..=max_rank + 1].fill(0);
    for &r in &ws.rank {
        ws.cnt[r as usize] += 1;
    }
    for i in 1..=max_rank + 1 {
        ws.cnt[i] += ws.cnt[i - 1];
    }
    for i in (0..n).rev() {
        let r = ws.rank[i] as usize;
        ws.cnt[r] -= 1;
        ws.sa[ws.cnt[r] as usize] = i as u32;
    }

    let mut k = 1usize;
    while k < n {
        // order by second key: suffixes without one come first
        let mut p = 0;
        for i in n - k..n {
            ws.by_second[p] = i as u32;
            p += 1;
        }
        for &i in ws.sa.iter() {
            if i as usize >= k {
                ws.by_second[p] = i - k as u32;
                p += 1;
            }
        }
        // stable counting sort by first key over the live rank range
        ws.cnt[..=max_rank + 1].fill(0);
        for &r in ws.rank.iter() {
            ws.cnt[r as usize] += 1;
        }
        for i in 1..=max_rank + 1 {
            ws.cnt[i] += ws.cnt[i - 1];
        }
        for &i in ws.by_second.iter().rev() {
            let r = ws.rank[i as usize] as usize;
            ws.cnt[r] -= 1;
            ws.sa[ws.cnt[r] as usize] = i;
        }
        // re-rank
        let rank = &ws.rank;
        let second = |i: usize| if i + k < n { rank[i + k] } else { 0 };
        ws.new_rank[ws.sa[0] as usize] = 1;
        let mut r = 1u32;
        for w in 1..n {
            let a = ws.sa[w - 1] as usize;
            let b = ws.sa[w] as usize;
            if rank[a] != rank[b] || second(a) != second(b) {
                r += 1;
            }
            ws.new_rank[b] = r;
        }
        std::mem::swap(&mut ws.rank, &mut ws.new_rank);
        if r as usize == n {
            break;
        }
        max_rank = r as usize;
        k <<= 1;
    }
}

/// Kasai LCP into `ws.lcp`: `lcp[r]` is the longest common prefix of the
/// suffixes at ranks r-1 and r. Reuses `ws.new_rank` for the inverse
/// permutation.
fn lcp_array(s: &[u8], ws: &mut Workspace) {
    let n = s.len();
    ws.new_rank.resize(n, 0);
    for (r, &p) in ws.sa.iter().enumerate() {
        ws.new_rank[p as usize] = r as u32;
    }
    ws.lcp.clear();
    ws.lcp.resize(n, 0);
    let mut h = 0usize;
    for i in 0..n {
        let r = ws.new_rank[i] as usize;
        if r > 0 {
            let j = ws.sa[r - 1] as usize;
            while i + h < n && j + h < n && s[i + h] == s[j + h] {
                h += 1;
            }
            ws.lcp[r] = h as u32;
            h = h.saturating_sub(1);
        } else {
            h = 0;
        }
    }
}

/// Longest previous factor into `ws.lpf`: `lpf[i]` is the length of the
/// longest prefix of `s[i..]` that also occurs starting at some position
/// `j < i` (overlap with the factor itself allowed). Stack sweep over the
/// suffix array.
fn longest_previous_factor(s: &[u8], ws: &mut Workspace) {
    let n = s.len();
    suffix_array(s, ws);
    lcp_array(s, ws);
    ws.lpf.clear();
    ws.lpf.resize(n, 0);
    // stack of (position, lcp to the element below)
    let mut stack: Vec<(i64, u32)> = Vec::with_capacity(64);
    for r in 0..=n {
        let (cur_pos, cur_lcp) = if r < n {
            (ws.sa[r] as i64, ws.lcp[r])
        } else {
            (-1, 0)
        };
        let mut lcp_acc = cur_lcp;
        while let Some(&(top_pos, top_lcp)) = stack.last() {
            if cur_pos < top_pos {
                stack.pop();
                ws.lpf[top_pos as usize] = top_lcp.max(lcp_acc);
                lcp_acc = top_lcp.min(lcp_acc);
            } else {
                break;
            }
        }
        stack.push((cur_pos, lcp_acc));
    }
}

/// Suffix-automaton state. `first_end` is the 1-based end position of the
/// earliest occurrence of the state's strings; all strings of one state
/// share their occurrence-end set, and a clone keeps the original's value.
#[derive(Clone, Copy)]
struct SamState {
    next: [i32; 2],
    link: i32,
    len: u32,
    first_end: u32,
}

const SAM_ROOT: SamState = SamState {
    next: [-1, -1],
    link: -1,
    len: 0,
    first_end: 0,
};

fn sam_add(st: &mut Vec<SamState>, last: usize, c: usize, end_pos: u32) -> usize {
    let cur = st.len();
    st.push(SamState {
        next: [-1, -1],
        link: -1,
        len: st[last].len + 1,
        first_end: end_pos,
    });
    let mut p = last as i32;
    while p >= 0 && st[p as usize].next[c] < 0 {
        st[p as usize].next[c] = cur as i32;
        p = st[p as usize].link;
    }
    if p < 0 {
        st[cur].link = 0;
    } else {
        let q = st[p as usize].next[c] as usize;
        if st[q].len == st[p as usize].len + 1 {
            st[cur].link = q as i32;
        } else {
            let clone = st.len();
            let mut cl = st[q];
            cl.len = st[p as usize].len + 1;
            st.push(cl);
            while p >= 0 && st[p as usize].next[c] == q as i32 {
                st[p as usize].next[c] = clone as i32;
                p = st[p as usize].link;
            }
            st[q].link = clone as i32;
            st[cur].link = clone as i32;
        }
    }
    cur
}

/// LZ76 production count for a binary string through an online suffix
/// automaton: the automaton grows with the scan, and an extension of the
/// current phrase is accepted only if the matched string already occurs
/// starting strictly before the phrase (`first_end <= pos + len`, which
/// admits self-referential overlap).
fn lz76_binary_sam(s: &[u8]) -> usize {
    let n = s.len();
    let mut st: Vec<SamState> = Vec::with_capacity(2 * n + 2);
    st.push(SAM_ROOT);
    let mut last = 0usize;
    let mut consumed = 0usize; // automaton covers s[..consumed]

    let mut count = 0usize;
    let mut pos = 0usize;
    while pos < n {
        let mut len = 0usize;
        let mut state = 0usize;
        loop {
            if pos + len >= n {
                // matched to the end of the string: unfinished phrase
                return count + 1;
            }
            while consumed <= pos + len {
                last = sam_add(&mut st, last, s[consumed] as usize, consumed as u32 + 1);
                consumed += 1;
            }
            let nxt = st[state].next[s[pos + len] as usize];
            if nxt >= 0 && st[nxt as usize].first_end as usize <= pos + len {
                state = nxt as usize;
                len += 1;
            } else {
                // longest seen prefix plus one new symbol
                count += 1;
                pos += len + 1;
                break;
            }
        }
    }
    count
}

/// Number of phrases in the LZ76 exhaustive production history.
///
/// Returns 0 for an empty string; otherwise at least 1 and at most the
/// length. Binary strings take the linear suffix-automaton path; wider
/// alphabets fall back to the longest-previous-factor parse.
pub fn lz76_complexity(s: &[u8]) -> usize {
    let n = s.len();
    if n == 0 {
        return 0;
    }
    // a constant string parses as its first symbol plus one matched tail
    if s.iter().all(|&b| b == s[0]) {
        return n.min(2);
    }
    if s.iter().all(|&b| b < 2) {
        return lz76_binary_sam(s);
    }
    lz76_via_lpf(s)
}

fn lz76_via_lpf(s: &[u8]) -> usize {
    let n = s.len();
    WORKSPACE.with(|ws| {
        let ws = &mut ws.borrow_mut();
        longest_previous_factor(s, ws);
        let mut pos = 0usize;
        let mut c = 0usize;
        while pos < n {
            c += 1;
            let step = ws.lpf[pos] as usize + 1;
            if pos + step > n {
                // tail fully matches history: it still counts as one production
                break;
            }
            pos += step;
        }
        c
    })
}

/// LZ76 complexity normalized by `n / log2(n)`, the asymptotic phrase count
/// of an unstructured binary string. Near 1 for random input, near 0 for
/// highly regular input.
pub fn lz76_normalized(s: &[u8]) -> f64 {
    let n = s.len();
    if n < 2 {
        return 0.0;
    }
    lz76_complexity(s) as f64 * (n as f64).log2() / n as f64
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Shuffle-normalized LZ76 complexity of a concatenated bit string.
///
/// The raw complexity is divided by the mean complexity of `shuffles`
/// seeded uniform permutations of the same string. Each permutation draws
/// its own generator from (seed, shuffle index), so the result is
/// deterministic for a fixed seed regardless of evaluation order.
pub fn pcipk_bits(bits: &[u8], shuffles: usize, seed: u64) -> Result<f64> {
    if bits.is_empty() {
        return Err(Error::Size("empty bit string".into()));
    }
    if shuffles == 0 {
        return Err(Error::Config("at least one shuffle is required".into()));
    }
    let raw = lz76_complexity(bits) as f64;
    let acc: f64 = (0..shuffles)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ i as u64));
            let mut work = bits.to_vec();
            work.shuffle(&mut rng);
            lz76_complexity(&work) as f64
        })
        .sum();
    Ok(raw / (acc / shuffles as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Literal transcription of the Kaspar-Schuster production-counting
    /// procedure; quadratic, used only as an oracle.
    pub(crate) fn lz76_naive(s: &[u8]) -> usize {
        let n = s.len();
        if n == 0 {
            return 0;
        }
        if n == 1 {
            return 1;
        }
        let mut c = 1usize;
        let mut l = 1usize;
        let mut i = 0usize;
        let mut k = 1usize;
        let mut k_max = 1usize;
        loop {
            if s[i + k - 1] == s[l + k - 1] {
                k += 1;
                if l + k > n {
                    c += 1;
                    break;
                }
            } else {
                if k > k_max {
                    k_max = k;
                }
                i += 1;
                if i == l {
                    c += 1;
                    l += k_max;
                    if l + 1 > n {
                        break;
                    }
                    i = 0;
                    k = 1;
                    k_max = 1;
                } else {
                    k = 1;
                }
            }
        }
        c
    }

    fn naive_lpf(s: &[u8]) -> Vec<u32> {
        let n = s.len();
        let mut lpf = vec![0u32; n];
        for i in 1..n {
            for j in 0..i {
                let mut l = 0;
                while i + l < n && s[j + l] == s[i + l] {
                    l += 1;
                }
                lpf[i] = lpf[i].max(l as u32);
            }
        }
        lpf
    }

    fn bits_from_str(s: &str) -> Vec<u8> {
        s.bytes().map(|b| b - b'0').collect()
    }

    #[test]
    fn lpf_matches_naive_on_random_strings() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ws = Workspace::default();
        for _ in 0..50 {
            let n = rng.gen_range(1..200);
            let s: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
            longest_previous_factor(&s, &mut ws);
            assert_eq!(ws.lpf, naive_lpf(&s), "s={s:?}");
        }
        // wider alphabet
        for _ in 0..20 {
            let n = rng.gen_range(1..150);
            let s: Vec<u8> = (0..n).map(|_| rng.gen_range(0..5u8)).collect();
            longest_previous_factor(&s, &mut ws);
            assert_eq!(ws.lpf, naive_lpf(&s), "s={s:?}");
        }
    }

    #[test]
    fn phrase_counts_on_hand_parsed_catalog() {
        // counts hand-traced through the exhaustive-history parse
        let catalog: &[(&str, usize)] = &[
            ("0", 1),
            ("01", 2),
            ("00", 2),
            ("010", 3),
            ("0001", 2),
            ("0100101", 4),
            ("1111111111", 2),
            ("0101010101010101", 3),
            ("0011010010", 5),
            ("10110100011", 6),
            ("1100", 3),
            ("10010", 4),
        ];
        for (s, expect) in catalog {
            let bits = bits_from_str(s);
            assert_eq!(lz76_complexity(&bits), *expect, "fast count for {s}");
            assert_eq!(lz76_naive(&bits), *expect, "naive count for {s}");
        }
    }

    #[test]
    fn zeros_have_complexity_two() {
        assert_eq!(lz76_complexity(&[0u8; 100]), 2);
    }

    #[test]
    fn alternating_has_complexity_three() {
        let bits: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        assert_eq!(lz76_complexity(&bits), 3);
    }

    #[test]
    fn fast_matches_naive_on_random_strings() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..40 {
            let n = rng.gen_range(1..600);
            let s: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
            assert_eq!(lz76_complexity(&s), lz76_naive(&s));
        }
    }

    #[test]
    fn automaton_and_factor_routes_agree_with_naive() {
        // three independent routes: the suffix-automaton parse, the
        // longest-previous-factor parse, and the literal production count
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..60 {
            let n = rng.gen_range(2..800);
            let dense: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
            let expect = lz76_naive(&dense);
            assert_eq!(lz76_binary_sam(&dense), expect, "sam on {dense:?}");
            assert_eq!(lz76_via_lpf(&dense), expect, "lpf on {dense:?}");

            let sparse: Vec<u8> = (0..n).map(|_| u8::from(rng.gen::<f64>() < 0.02)).collect();
            if sparse.contains(&1) && sparse.contains(&0) {
                let expect = lz76_naive(&sparse);
                assert_eq!(lz76_binary_sam(&sparse), expect, "sam on {sparse:?}");
                assert_eq!(lz76_via_lpf(&sparse), expect, "lpf on {sparse:?}");
            }
        }
        // runs and near-periodic structures exercise the overlap rule
        for s in [
            b"0001000010000001".to_vec(),
            b"0101101011010110".to_vec(),
            vec![0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 1],
        ] {
            let bits: Vec<u8> = s.iter().map(|&b| b & 1).collect();
            assert_eq!(lz76_binary_sam(&bits), lz76_naive(&bits));
        }
    }

    #[test]
    fn complexity_is_complement_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n = rng.gen_range(2..500);
            let s: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
            let flipped: Vec<u8> = s.iter().map(|&b| 1 - b).collect();
            assert_eq!(lz76_complexity(&s), lz76_complexity(&flipped));
        }
    }

    #[test]
    fn complexity_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let n = rng.gen_range(1..300);
            let s: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
            let c = lz76_complexity(&s);
            assert!(c >= 1 && c <= n);
        }
    }

    #[test]
    fn pcipk_of_constant_train_is_one() {
        let bits = vec![0u8; 2048];
        let v = pcipk_bits(&bits, 5, 1).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn pcipk_of_periodic_train_is_small() {
        let bits: Vec<u8> = (0..2048).map(|i| (i % 2) as u8).collect();
        let v = pcipk_bits(&bits, 10, 3).unwrap();
        assert!(v < 0.5, "got {v}");
    }

    #[test]
    fn pcipk_is_reproducible_for_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bits: Vec<u8> = (0..4096).map(|_| rng.gen_range(0..2u8)).collect();
        let a = pcipk_bits(&bits, 20, 99).unwrap();
        let b = pcipk_bits(&bits, 20, 99).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let c = pcipk_bits(&bits, 20, 100).unwrap();
        // a different seed is allowed to give a (slightly) different value
        assert!((a - c).abs() < 0.1);
    }

    #[test]
    fn pcipk_rejects_empty_and_zero_shuffles() {
        assert!(matches!(pcipk_bits(&[], 5, 0), Err(Error::Size(_))));
        assert!(matches!(pcipk_bits(&[1], 0, 0), Err(Error::Config(_))));
    }
}
