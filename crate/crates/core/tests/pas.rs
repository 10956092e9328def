//! Distribution matcher, frame statistics and the LUT demapper.

use std::f64::consts::PI;

use isac_core::air::{gmi_estimate, gmi_with_demapper, AwgnChannel, Method};
use isac_core::pas::{
    build_llr_luts, ccdm_decode, ccdm_encode, lut_demap, pas_encode, Composition, LutOptions, PasConfig, PasFamily,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_bits(v: u64, k: usize) -> Vec<u8> {
    (0..k).rev().map(|i| (v >> i & 1) as u8).collect()
}

/// Every composition of `u` into `levels` non-negative counts.
fn compositions(u: usize, levels: usize) -> Vec<Vec<usize>> {
    if levels == 1 {
        return vec![vec![u]];
    }
    (0..=u)
        .flat_map(|first| {
            compositions(u - first, levels - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

#[test]
fn ccdm_is_bijective_and_order_preserving_for_short_blocks() {
    for u in 1..=8 {
        for levels in 1..=4 {
            for counts in compositions(u, levels) {
                let comp = Composition::new(counts.clone()).unwrap();
                let k = comp.payload_bits();
                let mut prev: Option<Vec<usize>> = None;
                for v in 0..1u64 << k {
                    let bits = to_bits(v, k);
                    let seq = ccdm_encode(&bits, &comp).unwrap();
                    assert_eq!(ccdm_decode(&seq, &comp).unwrap(), bits, "{counts:?} {v}");
                    if let Some(p) = &prev {
                        assert!(*p < seq, "{counts:?} not increasing at {v}");
                    }
                    prev = Some(seq);
                }
            }
        }
    }
}

#[test]
fn matcher_rate_approaches_entropy() {
    let target = [0.4, 0.3, 0.2, 0.1];
    let mut last_gap = f64::INFINITY;
    for u in [8, 32, 128, 512] {
        let comp = Composition::from_probs(&target, u).unwrap();
        let gap = comp.entropy_bits() - comp.rate();
        assert!(gap > 0.0 && gap < last_gap, "U={u} gap {gap}");
        last_gap = gap;
    }
    assert!(last_gap < 0.03, "{last_gap}");
}

fn gpas_config(bypass: usize) -> PasConfig {
    PasConfig {
        family: PasFamily::Gpas,
        u: 64,
        amp_bits: 2,
        phase_bits: 4,
        composition: Composition::new(vec![26, 19, 12, 7]).unwrap(),
        bypass,
        radii: None,
        parity_seed: 3,
    }
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

#[test]
fn gpas_phases_are_uniform_and_amplitudes_exact() {
    let cfg = gpas_config(8);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut hist = [0u64; 16];
    for _ in 0..300 {
        let f = pas_encode(&cfg, &random_bits(&mut rng, cfg.info_len())).unwrap();
        let mut counts = [0usize; 4];
        for &a in &f.amplitudes[0] {
            counts[a] += 1;
        }
        assert_eq!(counts.to_vec(), cfg.composition.counts());
        for s in &f.symbols {
            let m = ((PI / 2.0 - s.arg()) * 16.0 / PI - 1.0) / 2.0;
            hist[m.round().rem_euclid(16.0) as usize] += 1;
        }
    }
    let total: u64 = hist.iter().sum();
    let e = total as f64 / 16.0;
    let chi2: f64 = hist.iter().map(|&h| (h as f64 - e).powi(2) / e).sum();
    // 99.9% point of chi-square with 15 degrees of freedom
    assert!(chi2 < 37.7, "chi2 {chi2} {hist:?}");
}

#[test]
fn cpas_signs_are_balanced() {
    let cfg = PasConfig {
        family: PasFamily::Cpas,
        u: 64,
        amp_bits: 2,
        phase_bits: 1,
        composition: Composition::new(vec![26, 19, 12, 7]).unwrap(),
        bypass: 10,
        radii: None,
        parity_seed: 9,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut pos_re, mut pos_im, mut n) = (0u64, 0u64, 0u64);
    for _ in 0..300 {
        let f = pas_encode(&cfg, &random_bits(&mut rng, cfg.info_len())).unwrap();
        for s in &f.symbols {
            pos_re += u64::from(s.re > 0.0);
            pos_im += u64::from(s.im > 0.0);
            n += 1;
        }
    }
    let sd = (n as f64 * 0.25).sqrt();
    for pos in [pos_re, pos_im] {
        assert!((pos as f64 - n as f64 / 2.0).abs() < 4.0 * sd, "{pos} of {n}");
    }
}

#[test]
fn lut_demapper_tracks_exact_on_shaped_gpas() {
    let c = gpas_config(0).constellation().unwrap();
    for snr in [2.0, 12.0] {
        let ch = AwgnChannel::from_snr_db(snr).unwrap();
        let set = build_llr_luts(&c, &ch, 2, 4, &LutOptions::default()).unwrap();
        assert_eq!(set.table_count(), 7);
        let exact = gmi_estimate(&c, &ch, Method::Quadrature { order: Some(32) }).unwrap().bits;
        let lut = gmi_with_demapper(&c, &ch, 32, |y| lut_demap(y, &set)).unwrap();
        assert!(lut >= exact - 0.02, "{snr} dB: lut {lut} exact {exact}");
    }
}
