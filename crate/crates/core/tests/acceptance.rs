//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails. Tolerances are the constants below.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use cvoc::cli::{analyze, AnalysisConfig};
use cvoc::envelopes::{true_envelope, EnvelopeKind, TRUE_ENVELOPE_MAX_ITER, TRUE_ENVELOPE_TOL, TRUE_ENVELOPE_WEIGHT};
use cvoc::excitation::{hnr_estimate, hnr_weights, HnrConfig, HNR_FRAME_LENGTH};
use cvoc::metrics::{evaluate, MetricConfig};
use cvoc::noise_mask::{apply_cnm, compute_cnm, frame_gains, CnmPolarity, PddMap, DEFAULT_CNM_THRESHOLD};
use cvoc::pitch::{add_noise, contf0_baseline, pitch_error_metrics, refine_stonemask, NoiseKind, PitchConfig};
use cvoc::signal::{gen, next_pow2, rfft, window, write_wav, WindowKind};
use cvoc::spectral::MgcTrack;
use cvoc::synthesis::{csm_params, synth_csm, synth_pulse_noise, AnalysisBundle, SynthConfig};
use cvoc::vc::{dtw_align, gass_enhance, gass_gain, DtwNorm, GassConfig};
use cvoc::{FrameGrid, ParamTrack, TrackKind, Waveform};

const FS: f64 = 16000.0;
const SR: u32 = 16000;

// 1
const PITCH_RMSE_MAX_HZ: f64 = 2.0;
const STONEMASK_DRIFT_MAX_HZ: f64 = 1.0;
const PITCH_RUNTIME_MAX: Duration = Duration::from_secs(1);
// 2
const ROBUSTNESS_TRIALS: usize = 20;
const ROBUSTNESS_SNR_DB: f64 = 0.0;
// 4
const HNR_IDENTITY_TOL: f64 = 1e-12;
const HNR_EQUAL_POWER_TOL: f64 = 0.3;
// 5
const CSM_F0: f64 = 200.0;
const CSM_MVF: f64 = 4000.0;
const CSM_K: usize = 19;
const CSM_PEAK_FLOOR: f64 = 0.5;
const CSM_LEAK_CEILING: f64 = 1e-3;
const GAMMA_FRAMES: usize = 200;
const GAMMA_REL_TOL: f64 = 1e-9;
// 6
const COPY_ITEMS: usize = 10;
const COPY_MIN_PASSING: usize = 8;
const IS_MAX: f64 = 0.1;
// 7
const IDENTITY_TOL: f64 = 1e-12;
// 9
const TE_FRAMES: usize = 100;
// 10
const DTW_PAIRS: usize = 1000;
// 11
const GASS_GAIN_TRIALS: usize = 10_000;
const GASS_CLEAN_TOL: f64 = 1e-3;
const GASS_MIN_IMPROVEMENT_DB: f64 = 3.0;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn grid(frames: usize) -> FrameGrid {
    FrameGrid::new(0.005, 0.025, frames).unwrap()
}

fn wave(x: Vec<f64>) -> Waveform {
    Waveform::new(x, SR).unwrap()
}

fn track_from(f: &dyn Fn(f64) -> f64, frames: usize) -> ParamTrack {
    let v = (0..frames).map(|i| f(i as f64 * 0.005)).collect();
    ParamTrack::new(v, grid(frames), TrackKind::ContF0).unwrap()
}

/// Harmonic signal with 1/k amplitudes up to 4 kHz.
fn harmonic_signal(n: usize, f0: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let mut x = gen::harmonic(FS, n, f0, 4000.0, &|k, _| (1.0 / k as f64, 0.0));
    gen::scale_to_peak(&mut x, 0.8);
    x
}

fn rmse_against(est: &ParamTrack, reference: &ParamTrack) -> f64 {
    let n = est.len().min(reference.len());
    let e = ParamTrack::new(est.values()[..n].to_vec(), grid(n), TrackKind::Other).unwrap();
    let r = ParamTrack::new(reference.values()[..n].to_vec(), grid(n), TrackKind::Other).unwrap();
    pitch_error_metrics(&e, &r, &vec![true; n]).unwrap().rmse
}

fn pitch_accuracy() -> Outcome {
    let x = wave(harmonic_signal(16000, &|_| 150.0));
    let cfg = PitchConfig::default();
    let start = Instant::now();
    let est = contf0_baseline(&x, &cfg).map_err(|e| e.to_string())?.track;
    let reference = track_from(&|_| 150.0, est.len());
    let exact = reference.clone();
    let refined = refine_stonemask(&exact, &x, &cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let rmse = rmse_against(&est, &reference);
    let drift = refined.values().iter().map(|f| (f - 150.0).abs()).fold(0.0, f64::max);
    check(
        rmse < PITCH_RMSE_MAX_HZ && drift < STONEMASK_DRIFT_MAX_HZ && elapsed < PITCH_RUNTIME_MAX,
        format!(
            "baseline RMSE {rmse:.3} Hz, stonemask drift {drift:.4} Hz, {:.0} ms",
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn robustness_ordering() -> Outcome {
    let cfg = PitchConfig::default();
    let mut rng = gen::rng(2024);
    let items: Vec<(f64, f64, f64)> = (0..ROBUSTNESS_TRIALS)
        .map(|_| {
            (
                rng.gen_range(100.0..220.0),
                rng.gen_range(0.0..15.0),
                rng.gen_range(2.0..6.0),
            )
        })
        .collect();
    let mut lines = Vec::new();
    let mut ok = true;
    for kind in [NoiseKind::White, NoiseKind::Pink] {
        let (mut base_sum, mut sm_sum) = (0.0, 0.0);
        for (t, &(f, depth, rate)) in items.iter().enumerate() {
            let contour = move |s: f64| f + depth * (2.0 * PI * rate * s).sin();
            let clean = wave(harmonic_signal(16000, &contour));
            let noisy = add_noise(&clean, kind, ROBUSTNESS_SNR_DB, 100 + t as u64).map_err(|e| e.to_string())?;
            let base = contf0_baseline(&noisy, &cfg).map_err(|e| e.to_string())?.track;
            let sm = refine_stonemask(&base, &noisy, &cfg).map_err(|e| e.to_string())?;
            let reference = track_from(&contour, base.len());
            base_sum += rmse_against(&base, &reference);
            sm_sum += rmse_against(&sm, &reference);
        }
        let (b, s) = (base_sum / ROBUSTNESS_TRIALS as f64, sm_sum / ROBUSTNESS_TRIALS as f64);
        ok &= s < b;
        lines.push(format!("{kind:?}: stonemask {s:.2} Hz vs baseline {b:.2} Hz"));
    }
    check(ok, lines.join("; "))
}

fn metric_partition() -> Outcome {
    let n = 12;
    let reference = ParamTrack::new(vec![100.0; n], grid(n), TrackKind::Other).unwrap();
    // frames 0..10 voiced; frame 3 gross (+25 %), frame 5 +6 Hz, frame 7 -4 Hz
    let mut est = vec![100.0; n];
    est[3] = 125.0;
    est[5] = 106.0;
    est[7] = 96.0;
    est[10] = 300.0;
    est[11] = 10.0;
    let voiced: Vec<bool> = (0..n).map(|i| i < 10).collect();
    let est = ParamTrack::new(est, grid(n), TrackKind::Other).unwrap();
    let r = pitch_error_metrics(&est, &reference, &voiced).map_err(|e| e.to_string())?;
    // hand values: 9 fine frames with errors {6, -4, 0 x7}
    let mfpe: f64 = 2.0 / 9.0;
    let std = (52.0 / 9.0 - mfpe * mfpe).sqrt();
    let rmse = ((625.0 + 36.0 + 16.0) / 10.0f64).sqrt();
    let exact =
        r.gpe == 10.0 && (r.mfpe - mfpe).abs() < 1e-12 && (r.std - std).abs() < 1e-12 && (r.rmse - rmse).abs() < 1e-12;
    let partition = r.n_gross + (r.n_voiced - r.n_gross) == 10 && r.n_gross == 1 && r.n_voiced == 10;
    check(
        exact && partition,
        format!(
            "GPE {} %, MFPE {:.6}, STD {:.6}, gross {} + fine {} = N_v {}",
            r.gpe,
            r.mfpe,
            r.std,
            r.n_gross,
            r.n_voiced - r.n_gross,
            r.n_voiced
        ),
    )
}

fn hnr_identity() -> Outcome {
    let mut rng = gen::rng(4);
    let n = 2000;
    let values: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(-6.0..6.0))).collect();
    let t = ParamTrack::new(values, grid(n), TrackKind::Hnr).unwrap();
    let w = hnr_weights(&t).map_err(|e| e.to_string())?;
    let worst = w
        .w_v
        .iter()
        .zip(&w.w_u)
        .map(|(v, u)| (v * v + u * u - 1.0).abs())
        .fold(0.0, f64::max);
    let s = gen::sine(FS, 16000, 150.0, 1.0, 0.0);
    let noise = gen::white_noise(16000, 5);
    let x: Vec<f64> = s.iter().zip(&noise).map(|(a, b)| a + 0.5f64.sqrt() * b).collect();
    let frames = 200;
    let g = FrameGrid::new(0.005, HNR_FRAME_LENGTH, frames).unwrap();
    let h = hnr_estimate(&wave(x), &g, &HnrConfig::default()).map_err(|e| e.to_string())?;
    let interior = &h.values()[8..frames - 8];
    let mean = interior.iter().sum::<f64>() / interior.len() as f64;
    check(
        worst < HNR_IDENTITY_TOL && (mean - 1.0).abs() <= HNR_EQUAL_POWER_TOL,
        format!("max |w_v^2 + w_u^2 - 1| = {worst:.1e}, equal-power HNR {mean:.3}"),
    )
}

fn flat_bundle(frames: usize, f0: f64, mvf: f64) -> AnalysisBundle {
    let g = grid(frames);
    AnalysisBundle {
        contf0: ParamTrack::constant(f0, g, TrackKind::ContF0).unwrap(),
        mvf: ParamTrack::constant(mvf, g, TrackKind::Mvf).unwrap(),
        mgc: MgcTrack::new(vec![vec![0.0; 25]; frames], 24, 0.42, g).unwrap(),
        hnr: None,
        cnm: None,
        basis: None,
        envelope_kind: EnvelopeKind::Hilbert,
        sample_rate: SR,
    }
}

fn spectrum(x: &[f64]) -> (Vec<f64>, usize) {
    let nfft = next_pow2(x.len());
    let win = window(WindowKind::Hanning, x.len());
    let xw: Vec<f64> = x.iter().zip(&win).map(|(a, b)| a * b).collect();
    (rfft(&xw, nfft).iter().map(|z| z.norm()).collect(), nfft)
}

fn csm_structure() -> Outcome {
    let b = flat_bundle(200, CSM_F0, CSM_MVF);
    let clean = synth_csm(
        &b,
        &SynthConfig {
            noise: false,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let noisy = synth_csm(&b, &SynthConfig::default()).map_err(|e| e.to_string())?;
    let (mag, nfft) = spectrum(&clean.samples()[800..15200]);
    let at = |f: f64| mag[(f * nfft as f64 / FS).round() as usize];
    let top = (1..=40).map(|k| at(k as f64 * CSM_F0)).fold(0.0, f64::max);
    let peaks = (1..=39)
        .filter(|&k| at(k as f64 * CSM_F0) > CSM_PEAK_FLOOR * top)
        .count();
    let leak = (20..40).map(|k| at(k as f64 * CSM_F0)).fold(0.0, f64::max) / top;
    let band = |m: &[f64], lo: f64, hi: f64| -> f64 {
        let (a, z) = ((lo * nfft as f64 / FS) as usize, (hi * nfft as f64 / FS) as usize);
        m[a..z].iter().map(|v| v * v).sum()
    };
    let (nmag, _) = spectrum(&noisy.samples()[800..15200]);
    let noise_ratio = band(&nmag, 4200.0, 8000.0) / band(&mag, 4200.0, 8000.0).max(f64::MIN_POSITIVE);

    let frames = GAMMA_FRAMES + 1;
    let p = csm_params(&flat_bundle(frames, 137.0, 4000.0), 1.5).map_err(|e| e.to_string())?;
    let hop = 80.0;
    let w0 = 2.0 * PI * 137.0 / FS;
    let want = GAMMA_FRAMES as f64 * hop * w0;
    let rel = (p[GAMMA_FRAMES].gamma_acc - want).abs() / want;
    check(
        peaks == CSM_K && leak < CSM_LEAK_CEILING && noise_ratio > 1e6 && rel < GAMMA_REL_TOL,
        format!("{peaks} harmonic peaks, leakage {leak:.1e}, noise/clean above MVF {noise_ratio:.1e}, gamma rel err {rel:.1e}"),
    )
}

fn copy_synthesis_ordering() -> Outcome {
    let formants = gen::vowel_formants();
    let mut passing = 0;
    let mut worst_is: f64 = 0.0;
    let (mut fw_csm, mut fw_anchor) = (0.0, 0.0);
    for (i, f) in formants.iter().take(COPY_ITEMS).enumerate() {
        let base = 100.0 + 12.0 * i as f64;
        let contour = move |t: f64| base + 8.0 * (2.0 * PI * 2.5 * t).sin();
        let mut x = gen::vowel(FS, 16000, &contour, f, 4000.0, 30 + i as u64);
        gen::scale_to_peak(&mut x, 0.5);
        let x = wave(x);
        let b = analyze(&x, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
        let cfg = SynthConfig {
            seed: i as u64,
            ..Default::default()
        };
        let csm = synth_csm(&b, &cfg).map_err(|e| e.to_string())?;
        let voiced = vec![true; b.num_frames()];
        let anchor = synth_pulse_noise(&b.contf0, &voiced, &b.mgc, SR, i as u64).map_err(|e| e.to_string())?;
        let mc = MetricConfig::default();
        let rc = evaluate(&x, &csm, &mc).map_err(|e| e.to_string())?;
        let ra = evaluate(&x, &anchor, &mc).map_err(|e| e.to_string())?;
        fw_csm += rc.fwsnrseg / COPY_ITEMS as f64;
        fw_anchor += ra.fwsnrseg / COPY_ITEMS as f64;
        worst_is = worst_is.max(rc.is_dist);
        if rc.fwsnrseg > ra.fwsnrseg && rc.is_dist < IS_MAX {
            passing += 1;
        }
    }
    check(
        passing >= COPY_MIN_PASSING,
        format!("{passing}/{COPY_ITEMS} items; mean fwSNRseg csm {fw_csm:.2} dB vs anchor {fw_anchor:.2} dB; max IS(csm) {worst_is:.3}"),
    )
}

fn metric_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut fw_ok = true;
    for seed in 0..5u64 {
        let mut rng = gen::rng(seed);
        let x = if seed % 2 == 0 {
            let f = gen::vowel_formants()[rng.gen_range(0..10)].clone();
            let f0: f64 = rng.gen_range(90.0..250.0);
            gen::vowel(FS, 12000, &|_| f0, &f, rng.gen_range(2000.0..7000.0), seed)
        } else {
            gen::white_noise(12000, seed).iter().map(|v| 0.2 * v).collect()
        };
        let w = wave(x);
        let cfg = MetricConfig::default();
        let r = evaluate(&w, &w, &cfg).map_err(|e| e.to_string())?;
        for v in [r.llr, r.is_dist, r.lsd, r.mcd, r.wss, 1.0 - r.corr.unwrap_or(0.0)] {
            worst = worst.max(v.abs());
        }
        fw_ok &= r.fwsnrseg == cfg.fwsnr_max_db;
    }
    check(
        worst < IDENTITY_TOL && fw_ok,
        format!("max deviation from identity {worst:.1e}, fwSNRseg at clamp: {fw_ok}"),
    )
}

fn cnm_algebra() -> Outcome {
    let mut rng = gen::rng(8);
    let frames = 50;
    let bands = 32;
    let values: Vec<Vec<f64>> = (0..frames)
        .map(|_| (0..bands).map(|_| rng.gen_range(0.0..10.0)).collect())
        .collect();
    let centres = (0..bands).map(|i| 125.0 + 250.0 * i as f64).collect();
    let pdd = PddMap {
        values,
        bands: centres,
        grid: grid(frames),
    };
    let c = compute_cnm(&pdd, None, CnmPolarity::Literal).map_err(|e| e.to_string())?;
    let summary: Vec<f64> = pdd
        .values
        .iter()
        .map(|r| r.iter().sum::<f64>() / bands as f64)
        .collect();
    let (lo, hi) = summary
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let oracle_exact = summary
        .iter()
        .zip(&c.values)
        .all(|(s, v)| *v == 1.0 - (s - lo) / (hi - lo));
    let complement_exact = c.values.iter().zip(&c.normalized).all(|(v, n)| *v == 1.0 - n);

    let len = 64;
    let voiced: Vec<Vec<f64>> = (0..frames)
        .map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let unvoiced: Vec<Vec<f64>> = (0..frames)
        .map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let zero = apply_cnm(&voiced, &unvoiced, &vec![0.0; frames], DEFAULT_CNM_THRESHOLD).map_err(|e| e.to_string())?;
    let one = apply_cnm(&voiced, &unvoiced, &vec![1.0; frames], DEFAULT_CNM_THRESHOLD).map_err(|e| e.to_string())?;
    let bits = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .all(|(x, y)| x.to_bits() == y.to_bits())
    };
    let limits = bits(&zero, &voiced) && bits(&one, &unvoiced);
    let threshold = DEFAULT_CNM_THRESHOLD == 0.77
        && SynthConfig::default().cnm_threshold == 0.77
        && frame_gains(0.77, DEFAULT_CNM_THRESHOLD).0 == 1.0
        && frame_gains(0.7700001, DEFAULT_CNM_THRESHOLD).0 == 0.0;
    check(
        oracle_exact && complement_exact && limits && threshold,
        format!(
            "1 - normalized PDD exact: {}, cNM=0/1 limits bit-exact: {limits}, threshold 0.77: {threshold}",
            oracle_exact && complement_exact
        ),
    )
}

fn true_envelope_bound() -> Outcome {
    let mut rng = gen::rng(9);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut max_iter = 0;
    let mut all_converged = true;
    for i in 0..TE_FRAMES {
        let n = [256, 512, 1024][i % 3];
        let frame: Vec<f64> = if i % 2 == 0 {
            gen::white_noise(n, i as u64)
        } else {
            let f = gen::vowel_formants()[i % 10].clone();
            let f0: f64 = rng.gen_range(90.0..250.0);
            gen::vowel(FS, n, &|_| f0, &f, 4000.0, i as u64)
        };
        let te = true_envelope(&frame, TRUE_ENVELOPE_WEIGHT, TRUE_ENVELOPE_MAX_ITER).map_err(|e| e.to_string())?;
        let gap = te
            .spectrum
            .iter()
            .zip(&te.envelope)
            .map(|(s, c)| s - c)
            .fold(f64::NEG_INFINITY, f64::max);
        worst_gap = worst_gap.max(gap);
        max_iter = max_iter.max(te.iterations);
        all_converged &= te.converged;
    }
    let gap_db = worst_gap * 20.0 / std::f64::consts::LN_10;
    check(
        all_converged && worst_gap < TRUE_ENVELOPE_TOL && max_iter <= 50,
        format!("max S - C = {gap_db:.4} dB, max iterations {max_iter}, all converged: {all_converged}"),
    )
}

/// Minimum cost over every monotone path, by enumeration.
fn enumerate_paths(x: &[Vec<f64>], y: &[Vec<f64>]) -> (f64, usize) {
    fn walk(x: &[Vec<f64>], y: &[Vec<f64>], i: usize, j: usize, acc: f64, best: &mut f64, count: &mut usize) {
        let acc = acc + DtwNorm::Euclidean.distance(&x[i], &y[j]);
        if i + 1 == x.len() && j + 1 == y.len() {
            *count += 1;
            *best = best.min(acc);
            return;
        }
        if i + 1 < x.len() {
            walk(x, y, i + 1, j, acc, best, count);
        }
        if j + 1 < y.len() {
            walk(x, y, i, j + 1, acc, best, count);
        }
        if i + 1 < x.len() && j + 1 < y.len() {
            walk(x, y, i + 1, j + 1, acc, best, count);
        }
    }
    let (mut best, mut count) = (f64::INFINITY, 0);
    walk(x, y, 0, 0, 0.0, &mut best, &mut count);
    (best, count)
}

fn dtw_properties() -> Outcome {
    let mut rng = gen::rng(10);
    let mut bound_ok = true;
    let mut self_ok = true;
    for _ in 0..DTW_PAIRS {
        let (i, j) = (rng.gen_range(1..60), rng.gen_range(1..60));
        let x: Vec<Vec<f64>> = (0..i)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<Vec<f64>> = (0..j)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let (p, _) = dtw_align(&x, &y).map_err(|e| e.to_string())?;
        bound_ok &= i.max(j) <= p.len() && p.len() < i + j;
        let (_, d) = dtw_align(&x, &x).map_err(|e| e.to_string())?;
        self_ok &= d == 0.0;
    }
    let x = vec![vec![0.0], vec![2.0]];
    let y = vec![vec![0.0], vec![1.0], vec![2.0]];
    let (p, d) = dtw_align(&x, &y).map_err(|e| e.to_string())?;
    let (best, count) = enumerate_paths(&x, &y);
    let example_ok = (d - best).abs() < 1e-12 && count == 5 && p.len() == 3;
    check(
        bound_ok && self_ok && example_ok,
        format!("bounds hold on {DTW_PAIRS} pairs: {bound_ok}; DTW(X,X)=0: {self_ok}; 2x3 example {d} vs enumerated {best} over {count} paths"),
    )
}

fn snr_db(clean: &[f64], x: &[f64]) -> f64 {
    let s: f64 = clean.iter().map(|v| v * v).sum();
    let e: f64 = clean.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
    10.0 * (s / e).log10()
}

fn gass_properties() -> Outcome {
    let mut rng = gen::rng(11);
    let nonneg = (0..GASS_GAIN_TRIALS).all(|_| {
        let g = gass_gain(
            10f64.powf(rng.gen_range(-4.0..4.0)),
            10f64.powf(rng.gen_range(-4.0..4.0)),
        );
        g >= 0.0 && g.is_finite()
    });
    let mut x = vec![0.0; 1600];
    x.extend(gen::sine(FS, 8000, 440.0, 0.5, 0.0));
    let y = gass_enhance(&wave(x.clone()), &GassConfig::default()).map_err(|e| e.to_string())?;
    let err = x
        .iter()
        .zip(y.samples())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let rel = err / x.iter().map(|a| a * a).sum::<f64>().sqrt();

    let (lead, n) = (1600, 32000);
    let mut clean = vec![0.0; lead];
    clean.extend(gen::sine(FS, n - lead, 1000.0, 1.0, 0.0));
    let noise = gen::white_noise(n, 12);
    let noisy: Vec<f64> = clean.iter().zip(&noise).map(|(a, b)| a + 0.5f64.sqrt() * b).collect();
    let out = gass_enhance(&wave(noisy.clone()), &GassConfig::default()).map_err(|e| e.to_string())?;
    let before = snr_db(&clean[lead..], &noisy[lead..]);
    let after = snr_db(&clean[lead..], &out.samples()[lead..]);
    check(
        nonneg && rel < GASS_CLEAN_TOL && after - before >= GASS_MIN_IMPROVEMENT_DB,
        format!("gain >= 0 on {GASS_GAIN_TRIALS} draws: {nonneg}; clean rel. error {rel:.1e}; SNR {before:.2} -> {after:.2} dB"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut x = gen::vowel(FS, 12000, &|t| 120.0 + 15.0 * t, &gen::vowel_formants()[2], 4500.0, 1);
    gen::scale_to_peak(&mut x, 0.7);
    let input = dir.path().join("in.wav");
    write_wav(&input, &wave(x)).map_err(|e| e.to_string())?;
    let exe = env!("CARGO_BIN_EXE_cvoc");
    let mut outputs = Vec::new();
    for run in 0..2 {
        let bundle = dir.path().join(format!("b{run}.cvoc"));
        let out = dir.path().join(format!("y{run}.wav"));
        for args in [
            vec![
                "analyze",
                input.to_str().unwrap(),
                bundle.to_str().unwrap(),
                "--cnm",
                "literal",
            ],
            vec![
                "synthesize",
                bundle.to_str().unwrap(),
                out.to_str().unwrap(),
                "--seed",
                "42",
            ],
        ] {
            let st = Command::new(exe).args(&args).output().map_err(|e| e.to_string())?;
            if !st.status.success() {
                return Err(format!("{:?} failed: {}", args, String::from_utf8_lossy(&st.stderr)));
            }
        }
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    check(
        outputs[0] == outputs[1],
        format!(
            "two seeded runs, {} bytes each, identical: {}",
            outputs[0].len(),
            outputs[0] == outputs[1]
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("pitch accuracy", pitch_accuracy),
        ("noise-robustness ordering", robustness_ordering),
        ("error-metric partition", metric_partition),
        ("HNR identity", hnr_identity),
        ("CSM structure", csm_structure),
        ("copy-synthesis quality ordering", copy_synthesis_ordering),
        ("metric identities", metric_identities),
        ("cNM algebra", cnm_algebra),
        ("true-envelope upper bound", true_envelope_bound),
        ("DTW", dtw_properties),
        ("GA-SS", gass_properties),
        ("end-to-end determinism", determinism),
    ];
    let suite = Instant::now();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS  {:>2}  {name}: {d} [{secs:.1} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL  {:>2}  {name}: {d} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        criteria.len() - failed,
        suite.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
