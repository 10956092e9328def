//! One-dimensional LLR tables for generalized PAS.
//!
//! The exact two-dimensional LLRs of an APSK grid are approximated by
//! functions of a single feature of the received value:
//!
//! * amplitude bits: the LLR averaged over the angle, a function of `|y|`;
//! * the first two phase bits (signs of the real and imaginary part): the
//!   LLR averaged over the orthogonal axis on `[-g, g]`;
//! * remaining phase bits: a product `l_R(|y|) l_theta(arg y)`, where the
//!   phase factor is the LLR averaged over `R in [0, g]` and the radial
//!   factor the angular average of `l / l_theta`. The radial factor is
//!   shared by all of these bits.
//!
//! For two amplitude and four phase bits this gives seven tables.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::air::{AwgnChannel, ExactDemapper};
use crate::constellation::{gpas_phase, Constellation};
use crate::error::{invalid, Result};
use crate::numerics::{gray_inverse, GaussLegendre};

/// Radial domain `[0, R_MAX]` of the amplitude tables.
pub const R_MAX: f64 = 3.0;
/// Table resolution and averaging ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LutOptions {
    /// Entries per table.
    pub resolution: usize,
    /// Half-width of the orthogonal-axis average of the real/imaginary
    /// tables. With unit average power the outermost ring of a four-ring
    /// grid sits near 1.46; wider ranges let the steep LLR tails of empty
    /// regions dominate the average and cost rate at high SNR.
    pub g_axis: f64,
    /// Radial range `[0, g]` of the phase-factor average.
    pub g_radial: f64,
}

impl Default for LutOptions {
    fn default() -> Self {
        Self {
            resolution: 256,
            g_axis: 1.0,
            g_radial: 2.0,
        }
    }
}
/// Phase-table magnitudes below this are left out of the radial quotient.
const PHASE_GUARD: f64 = 1e-3;
const LEGENDRE_NODES: usize = 64;

/// Uniformly sampled table with linear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lut {
    pub lo: f64,
    pub hi: f64,
    /// Periodic tables wrap; others clamp at the edges.
    pub periodic: bool,
    pub values: Vec<f64>,
}

impl Lut {
    /// Abscissa of entry `i`.
    pub fn node(&self, i: usize) -> f64 {
        node(self.lo, self.hi, self.periodic, self.values.len(), i)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let v = self.values.len();
        if self.periodic {
            let t = ((x - self.lo) / (self.hi - self.lo)).rem_euclid(1.0) * v as f64;
            let i = (t.floor() as usize).min(v - 1);
            let f = t - i as f64;
            self.values[i] * (1.0 - f) + self.values[(i + 1) % v] * f
        } else {
            let t = ((x - self.lo) / (self.hi - self.lo) * (v - 1) as f64).clamp(0.0, (v - 1) as f64);
            let i = (t.floor() as usize).min(v - 2);
            let f = t - i as f64;
            self.values[i] * (1.0 - f) + self.values[i + 1] * f
        }
    }
}

fn node(lo: f64, hi: f64, periodic: bool, v: usize, i: usize) -> f64 {
    if periodic {
        lo + (hi - lo) * i as f64 / v as f64
    } else {
        lo + (hi - lo) * i as f64 / (v - 1) as f64
    }
}

/// All tables of the low-complexity demapper.
///
/// Order: one radial table per amplitude bit, the real and imaginary
/// tables, the shared radial factor, then one phase factor per remaining
/// phase bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlrLutSet {
    pub amp_bits: usize,
    pub phase_bits: usize,
    pub options: LutOptions,
    pub tables: Vec<Lut>,
}

impl LlrLutSet {
    pub fn table_count(&self) -> usize {
        self.tables.len()
    }

    pub fn stored_values(&self) -> usize {
        self.tables.iter().map(|t| t.values.len()).sum()
    }

    fn shared_radial(&self) -> &Lut {
        &self.tables[self.amp_bits + 2]
    }
}

/// Checks that `c` is an APSK grid with amplitude bits first and the
/// generalized-PAS phase labeling.
fn check_structure(c: &Constellation, amp_bits: usize, phase_bits: usize) -> Result<()> {
    if phase_bits < 2 || amp_bits == 0 || c.bits() != amp_bits + phase_bits {
        return Err(invalid(
            "constellation",
            format!("need amplitude + phase bits = {} with at least two phase bits", c.bits()),
        ));
    }
    let phases = 1usize << phase_bits;
    let mut ring_radius = vec![f64::NAN; 1 << amp_bits];
    for (x, &label) in c.points().iter().zip(c.labels()) {
        let a = gray_inverse(label >> phase_bits) as usize;
        let m = gray_inverse(label & (phases as u32 - 1)) as usize;
        let want = Complex64::from_polar(x.norm(), gpas_phase(m, phases));
        if (want - x).norm() > 1e-9 {
            return Err(invalid("constellation", "phase labels do not follow the generalized PAS grid"));
        }
        if ring_radius[a].is_nan() {
            ring_radius[a] = x.norm();
        } else if (ring_radius[a] - x.norm()).abs() > 1e-9 {
            return Err(invalid("constellation", "amplitude label does not identify a ring"));
        }
    }
    if ring_radius.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("constellation", "amplitude labels are not ordered by radius"));
    }
    Ok(())
}

/// Builds the tables by numerical averaging of the exact LLRs. Radial
/// tables cover `[0, R_MAX]`, Cartesian ones `[-R_MAX, R_MAX]` and phase
/// tables a full turn.
pub fn build_llr_luts(
    c: &Constellation,
    ch: &AwgnChannel,
    amp_bits: usize,
    phase_bits: usize,
    opts: &LutOptions,
) -> Result<LlrLutSet> {
    check_structure(c, amp_bits, phase_bits)?;
    let v = opts.resolution;
    if v < 4 {
        return Err(invalid("resolution", "need at least 4 entries per table"));
    }
    if !(opts.g_axis > 0.0 && opts.g_radial > 0.0) {
        return Err(invalid("g", "averaging ranges must be positive"));
    }
    let dm = ExactDemapper::new(c, ch)?;
    let re_bit = amp_bits;
    let im_bit = amp_bits + 1;
    let osc: Vec<usize> = (amp_bits + 2..amp_bits + phase_bits).collect();
    let (ga, gr) = (opts.g_axis, opts.g_radial);
    let gl_axis = GaussLegendre::new(LEGENDRE_NODES, -ga, ga);
    let gl_radius = GaussLegendre::new(LEGENDRE_NODES, 0.0, gr);
    let theta = |k: usize| node(0.0, TAU, true, v, k);
    let radius = |i: usize| node(0.0, R_MAX, false, v, i);
    let cart = |k: usize| node(-R_MAX, R_MAX, false, v, k);

    // exact LLRs on the polar grid, row per radius
    let polar: Vec<Vec<Vec<f64>>> = (0..v)
        .into_par_iter()
        .map(|i| (0..v).map(|k| dm.llrs(Complex64::from_polar(radius(i), theta(k)))).collect())
        .collect();

    let mut tables = Vec::new();
    for m in 0..amp_bits {
        let values = polar
            .iter()
            .map(|row| row.iter().map(|l| l[m]).sum::<f64>() / v as f64)
            .collect();
        tables.push(Lut {
            lo: 0.0,
            hi: R_MAX,
            periodic: false,
            values,
        });
    }
    for (bit, imag_axis) in [(re_bit, false), (im_bit, true)] {
        let values = (0..v)
            .into_par_iter()
            .map(|k| {
                let u = cart(k);
                gl_axis.integrate(|w| {
                    let y = if imag_axis { Complex64::new(w, u) } else { Complex64::new(u, w) };
                    dm.llrs(y)[bit]
                }) / (2.0 * ga)
            })
            .collect();
        tables.push(Lut {
            lo: -R_MAX,
            hi: R_MAX,
            periodic: false,
            values,
        });
    }
    let phase_tables: Vec<Vec<f64>> = osc
        .iter()
        .map(|&m| {
            (0..v)
                .into_par_iter()
                .map(|k| gl_radius.integrate(|r| dm.llrs(Complex64::from_polar(r, theta(k)))[m]) / gr)
                .collect()
        })
        .collect();
    let radial: Vec<Vec<f64>> = osc
        .iter()
        .zip(&phase_tables)
        .map(|(&m, ph)| radial_quotient(&polar, m, ph))
        .collect();
    let shared = (0..v)
        .map(|i| radial.iter().map(|r| r[i]).sum::<f64>() / radial.len().max(1) as f64)
        .collect();
    tables.push(Lut {
        lo: 0.0,
        hi: R_MAX,
        periodic: false,
        values: shared,
    });
    for values in phase_tables {
        tables.push(Lut {
            lo: 0.0,
            hi: TAU,
            periodic: true,
            values,
        });
    }
    Ok(LlrLutSet {
        amp_bits,
        phase_bits,
        options: *opts,
        tables,
    })
}

/// Angular average of `l_m(R, theta) / l_theta(theta)` over the bins where
/// the phase factor is not close to zero.
fn radial_quotient(polar: &[Vec<Vec<f64>>], m: usize, phase: &[f64]) -> Vec<f64> {
    polar
        .iter()
        .map(|row| {
            let mut acc = 0.0;
            let mut n = 0usize;
            for (l, &p) in row.iter().zip(phase) {
                if p.abs() >= PHASE_GUARD {
                    acc += l[m] / p;
                    n += 1;
                }
            }
            if n == 0 {
                0.0
            } else {
                acc / n as f64
            }
        })
        .collect()
}

/// Per-bit radial factors before sharing, one per oscillating phase bit.
pub fn radial_factors(c: &Constellation, ch: &AwgnChannel, set: &LlrLutSet) -> Result<Vec<Vec<f64>>> {
    let dm = ExactDemapper::new(c, ch)?;
    let v = set.options.resolution;
    let polar: Vec<Vec<Vec<f64>>> = (0..v)
        .into_par_iter()
        .map(|i| {
            (0..v)
                .map(|k| dm.llrs(Complex64::from_polar(node(0.0, R_MAX, false, v, i), node(0.0, TAU, true, v, k))))
                .collect()
        })
        .collect();
    Ok((set.amp_bits + 2..set.amp_bits + set.phase_bits)
        .zip(&set.tables[set.amp_bits + 3..])
        .map(|(m, ph)| radial_quotient(&polar, m, &ph.values))
        .collect())
}

/// Approximate LLRs of `y` from the tables.
pub fn lut_demap(y: Complex64, set: &LlrLutSet) -> Vec<f64> {
    let r = y.norm();
    let theta = y.arg().rem_euclid(TAU);
    let mut out = Vec::with_capacity(set.amp_bits + set.phase_bits);
    for t in &set.tables[..set.amp_bits] {
        out.push(t.eval(r));
    }
    out.push(set.tables[set.amp_bits].eval(y.re));
    out.push(set.tables[set.amp_bits + 1].eval(y.im));
    let radial = set.shared_radial().eval(r);
    for t in &set.tables[set.amp_bits + 3..] {
        out.push(radial * t.eval(theta));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::air::{gmi_estimate, gmi_with_demapper, Method};
    use crate::constellation::make_gpas_grid;

    fn opts(resolution: usize) -> LutOptions {
        LutOptions {
            resolution,
            ..Default::default()
        }
    }

    fn grid() -> Constellation {
        make_gpas_grid(2, 4, &[1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn seven_tables_of_v_entries() {
        let ch = AwgnChannel::from_snr_db(10.0).unwrap();
        let set = build_llr_luts(&grid(), &ch, 2, 4, &opts(64)).unwrap();
        assert_eq!(set.table_count(), 7);
        assert_eq!(set.stored_values(), 7 * 64);
    }

    #[test]
    fn real_table_is_odd_and_zero_at_origin() {
        let ch = AwgnChannel::from_snr_db(10.0).unwrap();
        let set = build_llr_luts(&grid(), &ch, 2, 4, &opts(64)).unwrap();
        let t = &set.tables[2];
        for i in 0..64 {
            assert!((t.values[i] + t.values[63 - i]).abs() < 1e-9);
        }
        let l = lut_demap(Complex64::new(0.0, 0.0), &set);
        assert!(l[2].abs() < 1e-9 && l[3].abs() < 1e-9);
    }

    #[test]
    fn phase_tables_have_expected_periods() {
        let ch = AwgnChannel::from_snr_db(10.0).unwrap();
        let v = 128;
        let set = build_llr_luts(&grid(), &ch, 2, 4, &opts(v)).unwrap();
        // third phase bit repeats every pi, the fourth every pi / 2
        for (table, shift) in [(&set.tables[5], v / 2), (&set.tables[6], v / 4)] {
            let scale = table.values.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            for k in 0..v {
                assert!((table.values[k] - table.values[(k + shift) % v]).abs() < 1e-9 * scale.max(1.0));
            }
            // and flips sign over half a period
            for k in 0..v {
                assert!((table.values[k] + table.values[(k + shift / 2) % v]).abs() < 1e-6 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn lut_gmi_close_to_exact() {
        let c = grid();
        for snr in [0.0, 8.0, 20.0] {
            let ch = AwgnChannel::from_snr_db(snr).unwrap();
            let set = build_llr_luts(&c, &ch, 2, 4, &LutOptions::default()).unwrap();
            let exact = gmi_estimate(&c, &ch, Method::Quadrature { order: None }).unwrap().bits;
            let lut = gmi_with_demapper(&c, &ch, 32, |y| lut_demap(y, &set)).unwrap();
            assert!(lut <= exact + 1e-6);
            assert!(exact - lut < 0.02, "snr {snr}: exact {exact} lut {lut}");
        }
    }

    #[test]
    fn phase_bit_signs_follow_exact_demapper_far_out() {
        let c = grid();
        let ch = AwgnChannel::from_snr_db(15.0).unwrap();
        let set = build_llr_luts(&c, &ch, 2, 4, &LutOptions::default()).unwrap();
        let dm = ExactDemapper::new(&c, &ch).unwrap();
        for m in 0..16 {
            let y = Complex64::from_polar(1.5, gpas_phase(m, 16));
            let exact = dm.llrs(y);
            let approx = lut_demap(y, &set);
            for b in 2..6 {
                assert_eq!(exact[b] > 0.0, approx[b] > 0.0, "phase {m} bit {b}");
            }
        }
    }

    #[test]
    fn phase_bits_share_the_radial_factor() {
        let c = grid();
        let ch = AwgnChannel::from_snr_db(10.0).unwrap();
        let set = build_llr_luts(&c, &ch, 2, 4, &opts(128)).unwrap();
        let f = radial_factors(&c, &ch, &set).unwrap();
        // close but not identical: within 10% outside the innermost ring
        for (i, (a, b)) in f[0].iter().zip(&f[1]).enumerate() {
            let r = set.tables[4].node(i);
            if r > 0.7 {
                assert!((a - b).abs() < 0.1 * a.abs().max(b.abs()), "R={r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_non_gpas_labels() {
        let ch = AwgnChannel::from_snr_db(10.0).unwrap();
        let qam = crate::constellation::make_qam(6).unwrap();
        assert!(build_llr_luts(&qam, &ch, 2, 4, &opts(32)).is_err());
    }
}
