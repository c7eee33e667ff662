use crate::route::Molecule;

pub const FINGERPRINT_BITS: usize = 2048;
const WORDS: usize = FINGERPRINT_BITS / 64;
const MAX_NGRAM: usize = 4;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// 2048-bit hashed n-gram fingerprint.
///
/// Every character n-gram of the molecule id with n in 1..=4 is hashed with
/// FNV-1a and sets bit `hash % 2048`. Counts are not kept.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: [u64; WORDS],
}

impl Fingerprint {
    pub fn of(m: &Molecule) -> Self {
        let mut words = [0u64; WORDS];
        let bytes = m.id().as_bytes();
        for n in 1..=MAX_NGRAM.min(bytes.len()) {
            for gram in bytes.windows(n) {
                let bit = ngram_bit(gram);
                words[bit / 64] |= 1 << (bit % 64);
            }
        }
        Fingerprint { words }
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of set bits, ascending.
    pub fn active(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.count_ones());
        for (wi, &w) in self.words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                let b = w.trailing_zeros();
                out.push(wi as u32 * 64 + b);
                w &= w - 1;
            }
        }
        out
    }
}

impl std::fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fingerprint({:?})", self.active())
    }
}

pub(crate) fn ngram_bit(gram: &[u8]) -> usize {
    (fnv1a64(gram) % FINGERPRINT_BITS as u64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn grams(s: &str) -> BTreeSet<usize> {
        let b = s.as_bytes();
        (1..=4)
            .flat_map(|n| b.windows(n).map(ngram_bit).collect::<Vec<_>>())
            .collect()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn pure_function_of_id() {
        let m = Molecule::new("ABCDEFG").unwrap();
        assert_eq!(Fingerprint::of(&m), Fingerprint::of(&m.clone()));
    }

    #[test]
    fn single_character() {
        let fp = Fingerprint::of(&Molecule::new("C").unwrap());
        assert_eq!(fp.count_ones(), 1);
        assert_eq!(fp.active(), vec![ngram_bit(b"C") as u32]);
    }

    #[test]
    fn bits_match_ngram_sets() {
        for (a, b) in [("ABCDEF", "ABCXEF"), ("HGFEDCBA", "HGFEDCBB"), ("AB", "AC")] {
            let fa = Fingerprint::of(&Molecule::new(a).unwrap());
            let fb = Fingerprint::of(&Molecule::new(b).unwrap());
            let ga = grams(a);
            assert_eq!(fa.active().into_iter().map(|x| x as usize).collect::<BTreeSet<_>>(), ga);
            for bit in ga.intersection(&grams(b)) {
                assert!(fa.get(*bit) && fb.get(*bit));
            }
        }
    }
}
