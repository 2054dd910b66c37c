//! Suffix array construction by prefix doubling with radix passes.

/// Suffix array of `s`. The last symbol must be a unique minimum (the
/// terminator), which keeps every comparison decided inside the string.
pub fn suffix_array(s: &[u32], alphabet: usize) -> Vec<u32> {
    let n = s.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sa: Vec<u32> = (0..n as u32).collect();
    let mut rank: Vec<u32> = s.to_vec();
    let mut tmp = vec![0u32; n];
    let mut second = vec![0u32; n];
    let mut bucket = vec![0usize; alphabet.max(n) + 1];

    // initial order by first symbol
    counting_sort(&mut sa, &rank, &mut bucket, alphabet, &mut second);

    let mut k = 1usize;
    loop {
        // order by second key: suffixes without a k-th successor first, then
        // the current order shifted back by k
        let mut p = 0;
        for i in n - k.min(n)..n {
            second[p] = i as u32;
            p += 1;
        }
        for &i in sa.iter() {
            if i as usize >= k {
                second[p] = i - k as u32;
                p += 1;
            }
        }
        let classes = rank.iter().copied().max().unwrap_or(0) as usize + 1;
        stable_by_rank(&second, &rank, &mut sa, &mut bucket[..=classes]);

        tmp[sa[0] as usize] = 0;
        let mut r = 0u32;
        for j in 1..n {
            let (a, b) = (sa[j - 1] as usize, sa[j] as usize);
            let ka = (rank[a], rank.get(a + k).copied());
            let kb = (rank[b], rank.get(b + k).copied());
            if ka != kb {
                r += 1;
            }
            tmp[b] = r;
        }
        std::mem::swap(&mut rank, &mut tmp);
        if r as usize == n - 1 {
            break;
        }
        k *= 2;
    }
    sa
}

fn counting_sort(sa: &mut [u32], key: &[u32], bucket: &mut [usize], alphabet: usize, scratch: &mut [u32]) {
    scratch.copy_from_slice(sa);
    stable_by_rank(scratch, key, sa, &mut bucket[..=alphabet]);
}

fn stable_by_rank(order: &[u32], rank: &[u32], out: &mut [u32], bucket: &mut [usize]) {
    bucket.iter_mut().for_each(|b| *b = 0);
    for &i in order {
        bucket[rank[i as usize] as usize + 1] += 1;
    }
    for c in 1..bucket.len() {
        bucket[c] += bucket[c - 1];
    }
    for &i in order {
        let r = rank[i as usize] as usize;
        out[bucket[r]] = i;
        bucket[r] += 1;
    }
}
