use std::f64::consts::{FRAC_PI_4, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::catalog::{ModulationKind, TechnologySpec};
use super::SynthOptions;
use crate::dataset::{RecordMeta, SignalRecord};
use crate::error::{Error, Result};
use crate::numerics::rng::{stream, tag, StreamRng};

/// `count` IQ records of `spec`, channel 0 real and channel 1 imaginary.
/// Record `i` depends only on (`spec.name`, `seed`, `i`).
pub fn gen_iq(
    spec: &TechnologySpec,
    count: usize,
    length: usize,
    seed: u64,
) -> Result<Vec<SignalRecord>> {
    gen_iq_with(spec, count, length, seed, SynthOptions::default())
}

pub fn gen_iq_with(
    spec: &TechnologySpec,
    count: usize,
    length: usize,
    seed: u64,
    opts: SynthOptions,
) -> Result<Vec<SignalRecord>> {
    spec.validate()?;
    if count == 0 || length == 0 {
        return Err(Error::Config(
            "gen_iq needs count >= 1 and length >= 1".into(),
        ));
    }
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, &[tag(&spec.name), i as u64]);
            let (samples, snr_db) = one_record(spec, length, opts, &mut rng);
            let data = samples
                .iter()
                .map(|c| c.re as f32)
                .chain(samples.iter().map(|c| c.im as f32))
                .collect();
            SignalRecord {
                id: i as u64,
                data,
                label: None,
                ranging_error_mm: None,
                los: None,
                meta: RecordMeta {
                    source: spec.name.clone(),
                    seed,
                    snr_db: Some(snr_db as f32),
                },
            }
        })
        .collect())
}

fn qpsk(rng: &mut StreamRng) -> f64 {
    FRAC_PI_4 + (rng.random_range(0..4) as f64) * PI / 2.0
}

fn one_record(
    spec: &TechnologySpec,
    length: usize,
    opts: SynthOptions,
    rng: &mut StreamRng,
) -> (Vec<Complex64>, f64) {
    let l = length as f64;
    let f0 = spec.carrier_cycles_per_window;
    let bw = spec.bandwidth_fraction * l;
    let sym = spec.symbol_len;
    let phase0 = rng.random_range(0.0..2.0 * PI);
    let offset = rng.random_range(0..sym);
    let active = ((spec.burst_duty * l).round() as usize).clamp(1, length);
    let start = rng.random_range(0..=length - active);

    let mut s = vec![Complex64::new(0.0, 0.0); length];
    match spec.modulation_kind {
        ModulationKind::Tone => {
            for (t, v) in s.iter_mut().enumerate() {
                *v = Complex64::from_polar(1.0, 2.0 * PI * f0 * t as f64 / l + phase0);
            }
        }
        ModulationKind::Chirp => {
            let mut phase = phase0;
            for (t, v) in s.iter_mut().enumerate() {
                *v = Complex64::from_polar(1.0, phase);
                let u = ((t + offset) % sym) as f64 / sym as f64;
                phase += 2.0 * PI * (f0 + bw * (u - 0.5)) / l;
            }
        }
        ModulationKind::PskLike => {
            let mut theta = qpsk(rng);
            for (t, v) in s.iter_mut().enumerate() {
                if (t + offset) % sym == 0 {
                    theta = qpsk(rng);
                }
                *v = Complex64::from_polar(1.0, 2.0 * PI * f0 * t as f64 / l + phase0 + theta);
            }
        }
        ModulationKind::NoiseBurst => {
            let spacing = l / sym as f64;
            let k = ((bw / spacing).floor() as usize).max(1);
            let freqs: Vec<f64> = (0..k)
                .map(|j| f0 + (j as f64 - (k as f64 - 1.0) / 2.0) * spacing)
                .collect();
            let norm = 1.0 / (k as f64).sqrt();
            let mut symbols: Vec<f64> = freqs.iter().map(|_| qpsk(rng)).collect();
            for (t, v) in s.iter_mut().enumerate() {
                if (t + offset) % sym == 0 {
                    symbols.iter_mut().for_each(|p| *p = qpsk(rng));
                }
                let tt = t as f64 / l;
                *v = freqs
                    .iter()
                    .zip(&symbols)
                    .map(|(&f, &p)| Complex64::from_polar(norm, 2.0 * PI * f * tt + phase0 + p))
                    .sum();
            }
        }
    }
    for (t, v) in s.iter_mut().enumerate() {
        if t < start || t >= start + active {
            *v = Complex64::new(0.0, 0.0);
        }
    }

    let [lo, hi] = spec.snr_db_range;
    let snr_db = if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    };
    if opts.noise {
        // Unit signal power inside the burst; complex noise power 10^(-snr/10).
        let sigma = (0.5 * 10f64.powf(-snr_db / 10.0)).sqrt();
        for v in s.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(re * sigma, im * sigma);
        }
    }
    (s, snr_db)
}
