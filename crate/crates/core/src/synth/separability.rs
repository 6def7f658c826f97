use rustfft::num_complex::Complex32;
use rustfft::FftPlanner;

use crate::dataset::SignalRecord;

/// Index of the largest-magnitude DFT bin of `ch0 + j·ch1`.
pub fn dominant_bin(record: &SignalRecord) -> usize {
    let mut buf: Vec<Complex32> = record
        .channel(0)
        .iter()
        .zip(record.channel(1))
        .map(|(&re, &im)| Complex32::new(re, im))
        .collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf.iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map_or(0, |(i, _)| i)
}

fn features(r: &SignalRecord) -> [f64; 2] {
    let energy = r.data.iter().map(|&v| (v as f64).powi(2)).sum::<f64>();
    [energy, dominant_bin(r) as f64]
}

/// Accuracy of a nearest-centroid classifier on z-scored (energy, dominant
/// DFT bin) features, fitted on `train` and scored on `test`.
pub fn nearest_centroid_accuracy(
    train: &[SignalRecord],
    test: &[SignalRecord],
    classes: usize,
) -> f64 {
    let ftrain: Vec<[f64; 2]> = train.iter().map(features).collect();
    let n = ftrain.len().max(1) as f64;
    let mut mean = [0.0; 2];
    let mut std = [0.0; 2];
    for d in 0..2 {
        mean[d] = ftrain.iter().map(|f| f[d]).sum::<f64>() / n;
        std[d] = (ftrain.iter().map(|f| (f[d] - mean[d]).powi(2)).sum::<f64>() / n)
            .sqrt()
            .max(1e-12);
    }
    let z = |f: [f64; 2]| [(f[0] - mean[0]) / std[0], (f[1] - mean[1]) / std[1]];
    let mut centroids = vec![[0.0; 2]; classes];
    let mut counts = vec![0usize; classes];
    for (r, f) in train.iter().zip(&ftrain) {
        let c = r.stratum();
        let zf = z(*f);
        centroids[c][0] += zf[0];
        centroids[c][1] += zf[1];
        counts[c] += 1;
    }
    for (c, k) in centroids.iter_mut().zip(&counts) {
        let k = (*k).max(1) as f64;
        c[0] /= k;
        c[1] /= k;
    }
    let correct = test
        .iter()
        .filter(|r| {
            let zf = z(features(r));
            let best = centroids
                .iter()
                .enumerate()
                .filter(|(c, _)| counts[*c] > 0)
                .min_by(|a, b| {
                    let da = (a.1[0] - zf[0]).powi(2) + (a.1[1] - zf[1]).powi(2);
                    let db = (b.1[0] - zf[0]).powi(2) + (b.1[1] - zf[1]).powi(2);
                    da.total_cmp(&db)
                })
                .map(|(c, _)| c);
            best == Some(r.stratum())
        })
        .count();
    correct as f64 / test.len().max(1) as f64
}
