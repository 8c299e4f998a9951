use std::fs;
use std::path::{Path, PathBuf};

use shallow_core::arch::{build_lenet, build_vgg16, build_vgg16_enhanced, conservation_report, ArchSpec, Family};
use shallow_core::complexity::{madds as count_madds, CountMode};
use shallow_core::data_io::{
    emit_table, load_cifar10_with, parse_table, save_checkpoint, CheckpointMeta, LoadOptions, Precision, DATASET_ENV,
};
use shallow_core::reference::{reproduce as reproduce_table, Reproduction};
use shallow_core::scaling::{extrapolate_error, fit_power_law, fit_power_law_weighted, invert_error, PowerLawFit, ScalingPoint};
use shallow_core::training::{preset as lookup_preset, preset_arch, train_with, TrainConfig, Variant};
use shallow_core::Error;

use crate::{ArchArgs, Failure, MaddMode, PrecisionArg, TableName};

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn print_table(columns: &[String], rows: &[Vec<String>]) -> Result<(), Failure> {
    print!("{}", emit_table(columns, rows)?);
    Ok(())
}

fn build(a: &ArchArgs) -> Result<ArchSpec, Failure> {
    let invalid = |m: &str| Failure { code: 2, message: format!("invalid architecture: {m}") };
    match a.family {
        Family::LeNet => {
            if a.growth.is_some() {
                return Err(invalid("--growth applies to vgg16 only"));
            }
            Ok(build_lenet(a.d, a.ratio.unwrap_or(8.0 / 3.0), a.d2)?)
        }
        Family::Vgg16 | Family::Vgg16Enhanced => {
            if a.ratio.is_some() || a.d2.is_some() {
                return Err(invalid("--ratio and --d2 apply to lenet only"));
            }
            if a.family == Family::Vgg16Enhanced {
                if a.growth.is_some() {
                    return Err(invalid("vgg16-enhanced has a fixed growth"));
                }
                return Ok(build_vgg16_enhanced(a.d)?);
            }
            Ok(build_vgg16(a.d, a.growth.unwrap_or(2.0))?)
        }
    }
}

fn load_spec(path: &Path) -> Result<ArchSpec, Failure> {
    ArchSpec::from_text(&read(path)?).map_err(|e| Failure { code: 2, message: format!("{}: {e}", path.display()) })
}

pub fn arch(a: &ArchArgs, out: Option<&Path>) -> Result<(), Failure> {
    let spec = build(a)?;
    let report = conservation_report(&spec)?;
    let mut audit = String::from("block,depth,extent,product\n");
    for (i, b) in report.blocks.iter().enumerate() {
        audit += &format!("{},{},{},{}\n", i + 1, b.depth, b.extent, b.product);
    }
    audit += &format!("# max deviation {:.2}%\n", 100.0 * report.max_deviation);
    match out {
        Some(path) => {
            write(path, spec.to_text().as_bytes())?;
            print!("{audit}");
        }
        None => {
            print!("{}", spec.to_text());
            eprint!("{audit}");
        }
    }
    Ok(())
}

pub fn madds(spec: Option<&Path>, arch: Option<&ArchArgs>, mode: MaddMode) -> Result<(), Failure> {
    let spec = match (spec, arch) {
        (Some(p), _) => load_spec(p)?,
        (None, Some(a)) => build(a)?,
        (None, None) => return Err(Failure::usage("give --spec or a family with --d")),
    };
    let mode = match mode {
        MaddMode::Forward => CountMode::Forward,
        MaddMode::ForwardBackward => CountMode::ForwardBackward,
    };
    let (cols, rows) = count_madds(&spec, mode)?.table();
    print_table(&cols, &rows)
}

fn read_points(path: &Path, column: Option<&str>) -> Result<Vec<ScalingPoint>, Failure> {
    let (cols, rows) = parse_table(&read(path)?)?;
    let find = |name: &str| cols.iter().position(|c| c == name);
    let x = match column {
        Some(c) => find(c).ok_or_else(|| Failure::usage(format!("no column {c:?} in {}", path.display())))?,
        None => 0,
    };
    let eps = find("epsilon").ok_or_else(|| Failure::usage(format!("{} has no epsilon column", path.display())))?;
    let std = find("std");
    let num = |s: &str| s.parse::<f64>().map_err(|_| Failure::usage(format!("{}: bad number {s:?}", path.display())));
    rows.iter()
        .map(|r| {
            let sd = match std {
                Some(i) if !r[i].is_empty() => Some(num(&r[i])?),
                _ => None,
            };
            Ok(ScalingPoint::with_std(num(&r[x])?, num(&r[eps])?, sd)?)
        })
        .collect()
}

fn fit_points(points: &[ScalingPoint], weighted: bool) -> Result<PowerLawFit, Failure> {
    Ok(if weighted { fit_power_law_weighted(points)? } else { fit_power_law(points)? })
}

pub fn fit(data: &Path, column: Option<&str>, weighted: bool) -> Result<(), Failure> {
    let points = read_points(data, column)?;
    let f = fit_points(&points, weighted)?;
    let cols = ["prefactor", "exponent", "log_residual", "points"].map(String::from);
    print_table(&cols, &[vec![f.prefactor.to_string(), f.exponent.to_string(), f.residual.to_string(), points.len().to_string()]])
}

pub fn extrapolate(data: Option<&Path>, law: Option<(f64, f64)>, ds: &[f64], eps: &[f64]) -> Result<(), Failure> {
    let fit = match (data, law) {
        (Some(p), _) => fit_points(&read_points(p, None)?, false)?,
        (None, Some((prefactor, exponent))) => PowerLawFit { prefactor, exponent, residual: 0.0 },
        (None, None) => return Err(Failure::usage("give --data or --prefactor with --exponent")),
    };
    if ds.is_empty() && eps.is_empty() {
        return Err(Failure::usage("give at least one --d or --epsilon"));
    }
    let mut rows = Vec::new();
    for &d in ds {
        rows.push(vec![d.to_string(), extrapolate_error(&fit, d)?.to_string()]);
    }
    for &e in eps {
        rows.push(vec![invert_error(&fit, e)?.to_string(), e.to_string()]);
    }
    print_table(&["d".to_string(), "epsilon".to_string()], &rows)
}

pub fn reproduce(which: TableName, out_dir: Option<&Path>) -> Result<(), Failure> {
    let tables = match which {
        TableName::Fig3a => vec![Reproduction::Fig3a],
        TableName::Fig3b => vec![Reproduction::Fig3b],
        TableName::Fig3c => vec![Reproduction::Fig3c],
        TableName::Fits => vec![Reproduction::Fits],
        TableName::All => Reproduction::ALL.to_vec(),
    };
    match out_dir {
        None if tables.len() > 1 => Err(Failure::usage("`all` needs --out-dir")),
        None => {
            let (cols, rows) = reproduce_table(tables[0])?;
            print_table(&cols, &rows)
        }
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
            for t in tables {
                let (cols, rows) = reproduce_table(t)?;
                let path = dir.join(format!("{t}.csv"));
                write(&path, emit_table(&cols, &rows)?.as_bytes())?;
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

pub fn preset(family: Family, d: usize, variant: Variant, out: Option<&Path>, arch_out: Option<&Path>) -> Result<(), Failure> {
    let config = lookup_preset(family, d, variant)?;
    let text = config.to_toml()?;
    if let Some(p) = arch_out {
        write(p, preset_arch(family, d, variant)?.to_text().as_bytes())?;
    }
    match out {
        Some(p) => write(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub struct TrainArgs {
    pub spec: PathBuf,
    pub config: PathBuf,
    pub seeds: u64,
    pub epochs: Option<usize>,
    pub out_dir: PathBuf,
    pub data_dir: Option<PathBuf>,
    pub allow_partial: bool,
    pub checkpoint_every: usize,
    pub precision: PrecisionArg,
}

const DATA_HINT: &str = "download the binary version of CIFAR-10 (cifar-10-binary.tar.gz), unpack it and point \
$CIFAR10_DIR (or --data-dir) at the directory holding data_batch_1.bin .. data_batch_5.bin and test_batch.bin";

pub fn train(a: TrainArgs) -> Result<(), Failure> {
    if a.seeds == 0 {
        return Err(Failure::usage("--seeds must be at least 1"));
    }
    let spec = load_spec(&a.spec)?;
    let mut config = TrainConfig::from_toml(&read(&a.config)?)?;
    if let Some(e) = a.epochs {
        config = config.truncated(e)?;
    }
    let Some(root) = a.data_dir.clone().or_else(|| std::env::var_os(DATASET_ENV).map(PathBuf::from)) else {
        return Err(Failure { code: 4, message: format!("no dataset: {DATA_HINT}") });
    };
    let options = LoadOptions { strict_counts: !a.allow_partial };
    let (train_set, test_set) =
        load_cifar10_with(&root, options).map_err(|e| Failure { code: 4, message: format!("{e}\nhint: {DATA_HINT}") })?;

    fs::create_dir_all(&a.out_dir).map_err(|e| Failure::usage(format!("{}: {e}", a.out_dir.display())))?;
    let precision = match a.precision {
        PrecisionArg::F32 => Precision::F32,
        PrecisionArg::F64 => Precision::F64,
    };
    let seeds: Vec<u64> = (0..a.seeds).map(|i| config.seed.wrapping_add(i)).collect();
    let last = config.epochs;
    let result = train_with(&spec, &config, &train_set, &test_set, &seeds, &mut |rec, net| {
        eprintln!(
            "seed {} epoch {}/{last}: lr {:.6} train_loss {:.5} test_error {:.4}",
            rec.seed, rec.epoch, rec.learning_rate, rec.train_loss, rec.test_error
        );
        let periodic = a.checkpoint_every > 0 && rec.epoch % a.checkpoint_every == 0;
        if rec.epoch == last || periodic {
            let bytes = save_checkpoint(net, &CheckpointMeta { seed: rec.seed, epoch: rec.epoch as u64, precision })?;
            let path = a.out_dir.join(format!("seed{}-epoch{}.ckpt", rec.seed, rec.epoch));
            fs::write(&path, bytes).map_err(|e| Error::Io { path, source: e })?;
        }
        Ok(())
    })
    .map_err(|e| match e {
        Error::Io { .. } => Failure::usage(e.to_string()),
        e => Failure { code: 3, message: e.to_string() },
    })?;

    let (cols, rows) = result.trace_table();
    write(&a.out_dir.join("results.csv"), emit_table(&cols, &rows)?.as_bytes())?;
    let (cols, rows) = result.summary_table();
    let summary = emit_table(&cols, &rows)?;
    write(&a.out_dir.join("summary.csv"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}
