//! Slanted strip truncation of the square lattice.
//!
//! Slanted coordinates are `l′ = l`, `m′ = m + round(β·l)` with `β = F_x/F_y`,
//! so the strip axis `m′ = 0` follows the line `F_x·l + F_y·m = 0`.

use crate::model::ModelConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct StripLattice {
    pub slant_ratio: f64,
    pub l_half: i64,
    pub w_half: i64,
    shift: Vec<i64>,
    /// Neighbour tables; the sentinel `len()` marks a missing neighbour.
    pub xp: Vec<u32>,
    pub xm: Vec<u32>,
    pub yp: Vec<u32>,
    pub ym: Vec<u32>,
}

impl StripLattice {
    pub fn new(slant_ratio: f64, l_half: i64, w_half: i64) -> Self {
        assert!(l_half >= 0 && w_half >= 0, "strip extents must be non-negative");
        let shift: Vec<i64> = (-l_half..=l_half).map(|l| (slant_ratio * l as f64).round() as i64).collect();
        let mut s = StripLattice {
            slant_ratio,
            l_half,
            w_half,
            shift,
            xp: Vec::new(),
            xm: Vec::new(),
            yp: Vec::new(),
            ym: Vec::new(),
        };
        let n = s.len();
        assert!(n < u32::MAX as usize, "strip too large");
        let sentinel = n as u32;
        let look = |s: &StripLattice, l: i64, m: i64| s.index_of(l, m).map(|i| i as u32).unwrap_or(sentinel);
        let (mut xp, mut xm, mut yp, mut ym) = (vec![0; n], vec![0; n], vec![0; n], vec![0; n]);
        for i in 0..n {
            let (l, m) = s.site(i);
            xp[i] = look(&s, l + 1, m);
            xm[i] = look(&s, l - 1, m);
            yp[i] = look(&s, l, m + 1);
            ym[i] = look(&s, l, m - 1);
        }
        s.xp = xp;
        s.xm = xm;
        s.yp = yp;
        s.ym = ym;
        s
    }

    pub fn width(&self) -> usize {
        (2 * self.w_half + 1) as usize
    }

    pub fn len(&self) -> usize {
        (2 * self.l_half + 1) as usize * self.width()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Slanted coordinates `(l′, m′)` of row `i`.
    pub fn slanted(&self, i: usize) -> (i64, i64) {
        let w = self.width();
        ((i / w) as i64 - self.l_half, (i % w) as i64 - self.w_half)
    }

    /// Physical site `(l, m)` of row `i`.
    pub fn site(&self, i: usize) -> (i64, i64) {
        let (lp, mp) = self.slanted(i);
        (lp, mp - self.shift[(lp + self.l_half) as usize])
    }

    pub fn to_slanted(&self, l: i64, m: i64) -> Option<(i64, i64)> {
        if l.abs() > self.l_half {
            return None;
        }
        let mp = m + self.shift[(l + self.l_half) as usize];
        (mp.abs() <= self.w_half).then_some((l, mp))
    }

    pub fn index_of(&self, l: i64, m: i64) -> Option<usize> {
        let (lp, mp) = self.to_slanted(l, m)?;
        Some((lp + self.l_half) as usize * self.width() + (mp + self.w_half) as usize)
    }

    /// True when row `i` lies in the outer `margin_fraction` of either extent.
    pub fn in_margin(&self, i: usize, margin_fraction: f64) -> bool {
        let (lp, mp) = self.slanted(i);
        let ml = margin_fraction * (2 * self.l_half + 1) as f64;
        let mw = margin_fraction * (2 * self.w_half + 1) as f64;
        (lp.abs() as f64) > self.l_half as f64 + 0.5 - ml || (mp.abs() as f64) > self.w_half as f64 + 0.5 - mw
    }
}

/// Strip following the field orientation of `config`.
pub fn make_strip(config: &ModelConfig, l_half: i64, w_half: i64) -> StripLattice {
    StripLattice::new(config.direction.beta(), l_half, w_half)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_without_slant() {
        let s = StripLattice::new(0.0, 3, 2);
        for i in 0..s.len() {
            assert_eq!(s.site(i), s.slanted(i));
        }
    }

    #[test]
    fn diagonal_spreading_line_is_on_axis() {
        let s = StripLattice::new(1.0, 20, 4);
        assert_eq!(s.to_slanted(10, -10), Some((10, 0)));
    }

    #[test]
    fn maps_are_bijective() {
        for beta in [0.0, 1.0 / 3.0, 0.618_033_988_7, 1.0] {
            let s = StripLattice::new(beta, 17, 6);
            for i in 0..s.len() {
                let (l, m) = s.site(i);
                assert_eq!(s.index_of(l, m), Some(i));
            }
        }
    }

    #[test]
    fn neighbour_tables_are_consistent() {
        let s = StripLattice::new(2.0 / 3.0, 9, 5);
        let n = s.len() as u32;
        for i in 0..s.len() {
            let (l, m) = s.site(i);
            if s.xp[i] != n {
                assert_eq!(s.site(s.xp[i] as usize), (l + 1, m));
                assert_eq!(s.xm[s.xp[i] as usize], i as u32);
            }
            if s.yp[i] != n {
                assert_eq!(s.site(s.yp[i] as usize), (l, m + 1));
                assert_eq!(s.ym[s.yp[i] as usize], i as u32);
            }
        }
    }
}
