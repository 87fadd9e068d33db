//! Integer maps between the original square lattice and the extended
//! (rotated) lattice of spacing `1/√N`.

use crate::error::{Error, Result};

/// Site `(l, m)` of the original lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteIndex {
    pub l: i64,
    pub m: i64,
}

/// Site `(s, p)` of the extended lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtendedIndex {
    pub s: i64,
    pub p: i64,
}

impl SiteIndex {
    pub fn new(l: i64, m: i64) -> Self {
        SiteIndex { l, m }
    }
}

impl ExtendedIndex {
    pub fn new(s: i64, p: i64) -> Self {
        ExtendedIndex { s, p }
    }
}

/// `(s, p) = (q·l − r·m, r·l + q·m)`.
pub fn to_extended(site: SiteIndex, r: i64, q: i64) -> ExtendedIndex {
    ExtendedIndex {
        s: q * site.l - r * site.m,
        p: r * site.l + q * site.m,
    }
}

/// Inverse of [`to_extended`]: `(l, m) = ((q·s + r·p)/N, (q·p − r·s)/N)`.
pub fn from_extended(idx: ExtendedIndex, r: i64, q: i64) -> Result<SiteIndex> {
    let n = r * r + q * q;
    let a = q * idx.s + r * idx.p;
    let b = q * idx.p - r * idx.s;
    if a.rem_euclid(n) != 0 || b.rem_euclid(n) != 0 {
        return Err(Error::NotOnSublattice { s: idx.s, p: idx.p });
    }
    Ok(SiteIndex { l: a / n, m: b / n })
}

/// True when `(s, p)` lies on the original sublattice.
pub fn on_sublattice(idx: ExtendedIndex, r: i64, q: i64) -> bool {
    (q * idx.s + r * idx.p).rem_euclid(r * r + q * q) == 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gcd;

    #[test]
    fn forward_examples() {
        assert_eq!(to_extended(SiteIndex::new(1, 0), 1, 1), ExtendedIndex::new(1, 1));
        assert_eq!(to_extended(SiteIndex::new(0, 0), 2, 3), ExtendedIndex::new(0, 0));
        assert_eq!(to_extended(SiteIndex::new(2, -1), 1, 2), ExtendedIndex::new(5, 0));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(from_extended(ExtendedIndex::new(1, 1), 1, 1).unwrap(), SiteIndex::new(1, 0));
        assert_eq!(
            from_extended(ExtendedIndex::new(1, 0), 1, 1),
            Err(Error::NotOnSublattice { s: 1, p: 0 })
        );
    }

    #[test]
    fn round_trip_exhaustive() {
        for q in 1..=7i64 {
            for r in 0..=q {
                if gcd(r, q) != 1 {
                    continue;
                }
                for l in -100..=100 {
                    for m in -100..=100 {
                        let site = SiteIndex::new(l, m);
                        assert_eq!(from_extended(to_extended(site, r, q), r, q).unwrap(), site);
                    }
                }
            }
        }
    }

    #[test]
    fn sublattice_congruence_exhaustive() {
        for &(r, q) in &[(0, 1), (1, 1), (1, 2), (2, 3), (3, 5)] {
            let n = r * r + q * q;
            let mut hits = 0;
            for s in -25..25 {
                for p in -25..25 {
                    let idx = ExtendedIndex::new(s, p);
                    let congruent = (q * s + r * p).rem_euclid(n) == 0;
                    assert_eq!(congruent, from_extended(idx, r, q).is_ok());
                    assert_eq!(congruent, on_sublattice(idx, r, q));
                    hits += congruent as i64;
                }
            }
            // one site in N belongs to the original lattice
            assert!((hits as f64 / 2500.0 - 1.0 / n as f64).abs() < 0.02);
        }
    }
}
