//! Acceptance suite: one line per criterion, `PASS`, `FAIL` or `SKIP`.
//! Criterion 9 needs the CIFAR-10 binaries under `$CIFAR10_DIR`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use shallow_core::arch::{build_lenet, build_vgg16, Family};
use shallow_core::complexity::{madds, quad_fit, CountMode};
use shallow_core::data_io::{emit_table, load_cifar10, save_checkpoint, CheckpointMeta, Precision, Split, DATASET_ENV};
use shallow_core::layers::{conv2d_forward, gradient_check, ConvLayer};
use shallow_core::model::Network;
use shallow_core::reference::{self, Series};
use shallow_core::scaling::{complexity_at_error, complexity_error_exponent, complexity_ratio, extrapolate_error, fit_power_law, log_interpolate, ScalingPoint, GMADD};
use shallow_core::training::{preset, preset_arch, train, train_with, L2Mode, Regime, TrainConfig, Variant};
use shallow_core::{Rng, Tensor};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

/// Forward MAdds of LeNet from the layer formulas directly.
fn lenet_madds_oracle(d1: u64, d2: u64) -> u64 {
    28 * 28 * 25 * 3 * d1 + 10 * 10 * 25 * d1 * d2 + 25 * d2 * 120 + 120 * 84 + 84 * 10
}

/// Forward MAdds of VGG-16 (growth 2) from the layer formulas directly.
fn vgg_madds_oracle(d: u64) -> u64 {
    let sets = [d, 2 * d, 4 * d, 8 * d, 8 * d];
    let extents = [32u64, 16, 8, 4, 2];
    let convs = [2, 2, 3, 3, 3];
    let mut total = 0;
    let mut cin = 3;
    for s in 0..5 {
        for _ in 0..convs[s] {
            total += extents[s] * extents[s] * 9 * cin * sets[s];
            cin = sets[s];
        }
    }
    total + cin * 4096 + 4096 * 4096 + 4096 * 10
}

fn c1_madds() -> Outcome {
    let lenet = [(6, 651_720), (19, 3_703_620), (44, 15_819_120), (86, 54_989_720), (164, 190_135_120)];
    let vgg = [(4, 18_276_352), (8, 22_167_552), (16, 37_249_024), (32, 96_608_256), (64, 332_111_872)];
    let mut bad = Vec::new();
    for (d1, want) in lenet {
        let spec = build_lenet(d1, 8.0 / 3.0, None).unwrap();
        let d2 = spec.conv_filters()[1] as u64;
        let got = madds(&spec, CountMode::Forward).unwrap().total;
        if got != want || lenet_madds_oracle(d1 as u64, d2) != want {
            bad.push(format!("lenet d1={d1}: {got}"));
        }
    }
    for (d, want) in vgg {
        let got = madds(&build_vgg16(d, 2.0).unwrap(), CountMode::Forward).unwrap().total;
        if got != want || vgg_madds_oracle(d as u64) != want {
            bad.push(format!("vgg d={d}: {got}"));
        }
    }
    verdict(bad.is_empty(), if bad.is_empty() { "10/10 totals exact".into() } else { bad.join("; ") })
}

fn c2_quadratic() -> Outcome {
    // d2 = 8/3 d1 exactly whenever d1 is a multiple of 3
    let lenet: Vec<(f64, f64)> =
        (1..=40).map(|k| 3 * k).map(|d1| (d1 as f64, lenet_madds_oracle(d1, 8 * d1 / 3) as f64)).collect();
    let vgg: Vec<(f64, f64)> = (4..=64).map(|d| (d as f64, vgg_madds_oracle(d) as f64)).collect();
    let fl = quad_fit(&lenet).unwrap();
    let fv = quad_fit(&vgg).unwrap();
    let close = |got: f64, want: f64| ((got - want) / want).abs() <= 0.005;
    let ok = close(fl.a, 20000.0 / 3.0)
        && close(fl.b, 66800.0)
        && close(fl.c, 10920.0)
        && close(fv.a, 76032.0)
        && close(fv.b, 60416.0)
        && close(fv.c, 16_818_176.0);
    verdict(ok, format!("lenet ({:.2}, {:.1}, {:.1}), vgg ({:.1}, {:.1}, {:.0})", fl.a, fl.b, fl.c, fv.a, fv.b, fv.c))
}

fn c3_exponents() -> Outcome {
    let targets = [
        (Series::LeNet, 0.404, 0.02),
        (Series::Vgg16, 0.405, 0.02),
        (Series::LeNetConstant4_3, 0.407, 0.03),
        (Series::LeNetConstant16_3, 0.357, 0.03),
        (Series::Vgg16Growth1_5, 0.401, 0.03),
        (Series::Vgg16Growth2_5, 0.324, 0.03),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (s, want, tol) in targets {
        let rho = fit_power_law(&reference::series(s).unwrap()).unwrap().exponent;
        ok &= (rho - want).abs() <= tol;
        parts.push(format!("{}={rho:.4}", s.name()));
    }
    verdict(ok, parts.join(", "))
}

fn c4_extrapolation() -> Outcome {
    let fit = fit_power_law(&reference::series(Series::LeNet).unwrap()).unwrap();
    let e = extrapolate_error(&fit, 27.0).unwrap();
    verdict((0.125..=0.140).contains(&e), format!("eps(27) = {e:.4}"))
}

fn c5_complexity() -> Outcome {
    let (lf, vf) = (reference::series_fit(Series::LeNet).unwrap(), reference::series_fit(Series::Vgg16).unwrap());
    let (lp, vp) = (reference::lenet_complexity().unwrap(), reference::vgg_complexity().unwrap());
    let l = complexity_at_error(&lf, &lp, 0.0481).unwrap() / GMADD;
    let v = complexity_at_error(&vf, &vp, 0.0481).unwrap() / GMADD;
    let mut ok = (l / 0.77 - 1.0).abs() <= 0.10 && (v / 1.27 - 1.0).abs() <= 0.10;

    let table = reference::published_complexity().unwrap();
    let tail = &table[table.len() - 3..];
    let le = complexity_error_exponent(&tail.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>()).unwrap();
    let ve = complexity_error_exponent(&tail.iter().map(|r| (r.0, r.2)).collect::<Vec<_>>()).unwrap();
    ok &= (le - 4.96).abs() <= 0.1 && (ve - 4.95).abs() <= 0.1;

    let (mut worst, mut at) = (0.0_f64, 0.0);
    for (eps, published) in reference::published_ratios().unwrap() {
        let gap = (complexity_ratio(&lf, &lp, &vf, &vp, eps).unwrap() - published).abs();
        if gap > worst {
            (worst, at) = (gap, eps);
        }
    }
    ok &= worst <= 0.02;
    verdict(
        ok,
        format!("0.0481: lenet {l:.3} / vgg {v:.3} GMAdd; exponents {le:.3} / {ve:.3}; worst ratio gap {worst:.4} at eps {at}"),
    )
}

fn c6_interpolation() -> Outcome {
    let runs = reference::lenet_bracketing_runs().unwrap();
    let point = |d1: usize, d2: usize| {
        let r = runs.iter().find(|r| r.0 == d1 && r.1 == d2).unwrap();
        ScalingPoint::new(r.1 as f64, r.2).unwrap()
    };
    let a = log_interpolate(16.0 / 3.0, &point(2, 5), &point(2, 6)).unwrap();
    let b = log_interpolate(8.0 / 3.0, &point(1, 2), &point(1, 3)).unwrap();
    verdict((a - 0.389).abs() <= 0.005 && (b - 0.498).abs() <= 0.005, format!("d=16/3 -> {a:.4}, d=8/3 -> {b:.4}"))
}

fn c7_gradients() -> Outcome {
    let mut rng = Rng::new(7);
    let lenet = Network::from_spec(&build_lenet(2, 8.0 / 3.0, None).unwrap(), &mut rng).unwrap();
    let (x, y) = common::random_batch(4, &mut rng);
    let l = gradient_check(&lenet, &x, &y, 1e-4, &mut rng);
    let vgg = Network::from_spec(&build_vgg16(1, 2.0).unwrap(), &mut rng).unwrap();
    let (x, y) = common::random_batch(2, &mut rng);
    let v = gradient_check(&vgg, &x, &y, 1e-3, &mut rng);
    let describe = |r: &shallow_core::Result<shallow_core::layers::GradCheckReport>| match r {
        Ok(rep) => {
            let w = rep.worst().unwrap();
            let checked: usize = rep.params.iter().map(|p| p.checked).sum();
            format!("worst {:.2e} at {} over {checked} coords", w.worst_rel_error, w.label)
        }
        Err(e) => e.to_string(),
    };
    verdict(l.is_ok() && v.is_ok(), format!("lenet d1=2: {}; vgg d=1: {}", describe(&l), describe(&v)))
}

fn c8_conv_oracle() -> Outcome {
    let mut rng = Rng::new(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let cin = rng.int_inclusive(1, 4) as usize;
        let cout = rng.int_inclusive(1, 5) as usize;
        let k = [1, 3, 5][rng.int_inclusive(0, 2) as usize];
        let pad = rng.int_inclusive(0, (k / 2) as i64) as usize;
        let h = rng.int_inclusive(k as i64, 12) as usize;
        let w = rng.int_inclusive(k as i64, 12) as usize;
        let layer = ConvLayer::he_normal(cin, cout, k, pad, &mut rng).unwrap();
        let mut layer = layer;
        for b in layer.bias.data_mut() {
            *b = rng.normal();
        }
        let x = Tensor::from_vec(&[cin, h, w], (0..cin * h * w).map(|_| rng.normal()).collect()).unwrap();
        let fast = conv2d_forward(&x, &layer).unwrap();
        for (a, b) in fast.data().iter().zip(common::conv_oracle(&x, &layer)) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(worst <= 1e-12, format!("max |fast - oracle| = {worst:.2e} over 100 cases"))
}

fn c9_training() -> Outcome {
    let Some(dir) = std::env::var_os(DATASET_ENV).map(PathBuf::from) else {
        return Outcome::Skip(format!("{DATASET_ENV} not set; CIFAR-10 binaries unavailable"));
    };
    let (train_set, test_set) = match load_cifar10(&dir) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(format!("loading {}: {e}", dir.display())),
    };
    let cfg = preset(Family::LeNet, 6, Variant::Main).unwrap().truncated(20).unwrap();
    let spec = preset_arch(Family::LeNet, 6, Variant::Main).unwrap();
    let smoke = train(&spec, &cfg, &train_set, &test_set, &[0]).unwrap();
    let mut means = Vec::new();
    for d1 in [1, 3, 6] {
        let c = preset(Family::LeNet, d1, Variant::Main).unwrap().truncated(15).unwrap();
        let s = preset_arch(Family::LeNet, d1, Variant::Main).unwrap();
        means.push(train(&s, &c, &train_set, &test_set, &[0, 1, 2]).unwrap().mean_error);
    }
    let ok = smoke.mean_error <= 0.45 && means[0] > means[1] && means[1] > means[2];
    verdict(ok, format!("d1=6 @20 epochs: {:.4}; 15-epoch means d1=1,3,6: {:.4} {:.4} {:.4}", smoke.mean_error, means[0], means[1], means[2]))
}

fn c10_determinism() -> Outcome {
    let train_set = common::learnable_dataset(6, 10, Split::Train);
    let test_set = common::learnable_dataset(3, 11, Split::Test);
    let spec = build_lenet(2, 8.0 / 3.0, None).unwrap();
    let cfg = TrainConfig {
        eta: 0.02,
        mu: 0.9,
        alpha: 9.5e-4,
        epochs: 3,
        batch_size: 20,
        schedule: vec![Regime { first_epoch: 1, last_epoch: 3, q: 0.8, interval: 2 }],
        seed: 0,
        validation_holdout: 0,
        l2: L2Mode::Coupled,
    };
    let run = || {
        let mut checkpoints = Vec::new();
        let result = train_with(&spec, &cfg, &train_set, &test_set, &[42], &mut |rec, net| {
            for precision in [Precision::F32, Precision::F64] {
                checkpoints.push(save_checkpoint(net, &CheckpointMeta { seed: rec.seed, epoch: rec.epoch as u64, precision })?);
            }
            Ok(())
        })
        .unwrap();
        let (cols, rows) = result.trace_table();
        (emit_table(&cols, &rows).unwrap(), checkpoints)
    };
    let (csv_a, ck_a) = run();
    let (csv_b, ck_b) = run();
    let ok = csv_a == csv_b && ck_a == ck_b && !ck_a.is_empty();
    verdict(ok, format!("results CSV {} bytes, {} checkpoints compared byte for byte", csv_a.len(), ck_a.len()))
}

fn main() {
    let criteria: [(u32, &str, Check); 10] = [
        (1, "MAdd exactness", c1_madds),
        (2, "quadratic recovery", c2_quadratic),
        (3, "power-law exponents", c3_exponents),
        (4, "extrapolation", c4_extrapolation),
        (5, "complexity vs error", c5_complexity),
        (6, "interpolation", c6_interpolation),
        (7, "gradient correctness", c7_gradients),
        (8, "conv oracle equivalence", c8_conv_oracle),
        (9, "training at desk scale", c9_training),
        (10, "determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Outcome::Fail(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {n:>2} {tag} [{name}] ({secs:.1}s): {detail}");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
