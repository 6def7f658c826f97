use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::catalog::{CirSpec, CIR_TAPS};
use super::SynthOptions;
use crate::dataset::{RecordMeta, SignalRecord};
use crate::error::{Error, Result};
use crate::numerics::rng::{stream, tag, StreamRng};

/// `count` CIR records of `spec` with ranging labels. Channel 0 carries the
/// in-phase taps, channel 1 the quadrature taps; the 150 active taps sit at
/// the head of the window and the rest is zero.
pub fn gen_cir(
    spec: &CirSpec,
    los: bool,
    count: usize,
    length: usize,
    seed: u64,
) -> Result<Vec<SignalRecord>> {
    gen_cir_with(spec, los, count, length, seed, SynthOptions::default())
}

pub fn gen_cir_with(
    spec: &CirSpec,
    los: bool,
    count: usize,
    length: usize,
    seed: u64,
    opts: SynthOptions,
) -> Result<Vec<SignalRecord>> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::Config("gen_cir needs count >= 1".into()));
    }
    if length < CIR_TAPS {
        return Err(Error::Config(format!(
            "CIR records need length >= {CIR_TAPS}, got {length}"
        )));
    }
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, &[tag(&spec.env_name), u64::from(los), i as u64]);
            let (taps, label) = one_cir(spec, los, opts, &mut rng);
            let mut data = vec![0f32; 2 * length];
            for (t, c) in taps.iter().enumerate() {
                data[t] = c.re as f32;
                data[length + t] = c.im as f32;
            }
            SignalRecord {
                id: i as u64,
                data,
                label: None,
                ranging_error_mm: Some(label as f32),
                los: Some(los),
                meta: RecordMeta {
                    source: spec.env_name.clone(),
                    seed,
                    snr_db: None,
                },
            }
        })
        .collect())
}

fn path(rng: &mut StreamRng, amplitude: f64) -> Complex64 {
    Complex64::from_polar(amplitude, rng.random_range(0.0..2.0 * PI))
}

fn one_cir(
    spec: &CirSpec,
    los: bool,
    opts: SynthOptions,
    rng: &mut StreamRng,
) -> (Vec<Complex64>, f64) {
    let mut taps = vec![Complex64::new(0.0, 0.0); CIR_TAPS];
    let fp = spec.first_path_index;
    let delay = if los {
        0
    } else {
        spec.nlos_extra_delay + rng.random_range(0..=spec.nlos_delay_spread)
    };
    let peak = fp + delay;
    if los {
        taps[fp] = path(rng, 1.0);
    } else {
        taps[fp] = path(rng, 10f64.powf(-spec.nlos_first_path_atten_db / 20.0));
        taps[peak] = path(rng, 1.0);
    }
    // Multipath tail after the strongest path, strictly weaker than it.
    for m in 1..=spec.n_multipath {
        let amp = (-spec.decay_per_tap * m as f64).exp() * rng.random_range(0.2..1.0);
        taps[peak + m] += path(rng, amp);
    }
    let label_noise: f64 = rng.sample(StandardNormal);
    let tap_noise: Vec<(f64, f64)> = (0..CIR_TAPS)
        .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let mut label = spec.range_bias_per_delay * delay as f64;
    if opts.noise {
        label += spec.label_noise_mm * label_noise;
        let s = spec.tap_noise_std / 2f64.sqrt();
        for (t, (re, im)) in taps.iter_mut().zip(tap_noise) {
            *t += Complex64::new(re * s, im * s);
        }
    }
    (taps, label)
}
