use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use divswap::metrics::{feature_report, heatmap_png, load_png, pixel_report, save_png};
use divswap::{
    div_swap, extract_patches, flip_audit, load_feature_map, ncc_match, save_feature_map,
    shifted_normalize, write_match_csv, FeatureMapF32, MatchResultF32, PatchGridF32,
    SigmaDistribution, SigmaVector, SwapConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::{
    HeatmapArgs, KindArg, MatchTableArgs, MetricsArgs, PatchArgs, RunArgs, SigmaArgs, SweepArgs,
};

const SEED_ENV: &str = "DIVSWAP_SEED";

fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not a u64"))),
        Err(_) => Ok(0),
    }
}

fn base_config(patch: &PatchArgs) -> CliResult<SwapConfig> {
    Ok(SwapConfig {
        patch_size: patch.patch_size,
        stride: patch.stride,
        seed: resolve_seed(patch.seed)?,
        epsilon: patch.epsilon,
        overlap: patch.overlap.into(),
        ..SwapConfig::default()
    })
}

fn swap_config(patch: &PatchArgs, sigma: &SigmaArgs) -> CliResult<SwapConfig> {
    let mut cfg = base_config(patch)?;
    let range = match (sigma.preset, sigma.sigma_max) {
        (Some(p), _) => Some(divswap::Preset::from(p).sigma_max()),
        (None, s) => s,
    };
    cfg.distribution = match (sigma.dist, range) {
        (Some(d), _) => d.into(),
        (None, Some(_)) => SigmaDistribution::Uniform,
        (None, None) => SigmaDistribution::None,
    };
    match (cfg.distribution, range) {
        (SigmaDistribution::None, r) => cfg.sigma_max = r.unwrap_or(0.0),
        (_, Some(r)) => cfg.sigma_max = r,
        (_, None) => {
            return Err(CliError::Usage(
                "a random --dist needs --sigma-max or --preset".into(),
            ))
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_pair(content: &Path, style: &Path) -> CliResult<(FeatureMapF32, FeatureMapF32)> {
    Ok((load_feature_map(content)?, load_feature_map(style)?))
}

/// Writes through a sibling temp file renamed into place on success.
fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut dyn Write) -> CliResult<()>,
) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn dist_label(dist: SigmaDistribution) -> &'static str {
    match dist {
        SigmaDistribution::Uniform => "uniform",
        SigmaDistribution::Normal => "normal",
        SigmaDistribution::None => "none",
    }
}

/// `<prefix>_000.dsfm`, … with enough zero padding that lexical order is
/// generation order.
fn output_prefix(out: &Path) -> CliResult<PathBuf> {
    if out.extension().is_some_and(|e| e == "dsfm") {
        let stem = out
            .file_stem()
            .ok_or_else(|| CliError::Usage(format!("bad output path {}", out.display())))?;
        Ok(out.with_file_name(stem))
    } else {
        fs::create_dir_all(out)?;
        Ok(out.join("swap"))
    }
}

fn numbered(prefix: &Path, index: usize, width: usize, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push(format!("_{index:0width$}{suffix}"));
    prefix.with_file_name(name)
}

#[derive(Serialize)]
struct AuditJson {
    n_flipped: usize,
    inequality_violations: usize,
    higher_norm_fraction: f64,
    seed: u64,
    sigma_max: f64,
    output_index: u64,
}

struct AuditBasis {
    content: PatchGridF32,
    style: PatchGridF32,
    baseline: MatchResultF32,
}

impl AuditBasis {
    fn new(content: &FeatureMapF32, style: &FeatureMapF32, cfg: &SwapConfig) -> CliResult<Self> {
        let content = extract_patches(content, cfg.patch_size, cfg.stride)?;
        let style = extract_patches(style, cfg.patch_size, cfg.stride)?;
        let zeros = SigmaVector::zeros(style.n_patches());
        let baseline = ncc_match(&content, &shifted_normalize(&style, &zeros, cfg.epsilon as f32)?)?;
        Ok(Self {
            content,
            style,
            baseline,
        })
    }
}

pub fn run(args: RunArgs) -> CliResult<()> {
    if args.num == 0 {
        return Err(CliError::Usage("--num must be at least 1".into()));
    }
    let cfg = swap_config(&args.patch, &args.sigma)?;
    let (content, style) = load_pair(&args.content, &args.style)?;

    let outputs = (0..args.num as u64)
        .into_par_iter()
        .map(|i| div_swap(&content, &style, &cfg.with_output_index(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let audit = if args.audit {
        Some(AuditBasis::new(&content, &style, &cfg)?)
    } else {
        None
    };

    let prefix = output_prefix(&args.out)?;
    let width = (args.num - 1).to_string().len().max(3);
    for (i, out) in outputs.iter().enumerate() {
        let path = numbered(&prefix, i, width, ".dsfm");
        save_feature_map(&out.output, &path)?;

        let mut distinct = out.matches.assignments.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let mut line = format!(
            "{}  seed={} output={i} dist={} sigma_max={} distinct_style_patches={}",
            path.display(),
            cfg.seed,
            dist_label(cfg.distribution),
            cfg.sigma_max,
            distinct.len()
        );

        if let Some(basis) = &audit {
            let report = flip_audit(
                &basis.content,
                &basis.style,
                &basis.baseline,
                &out.matches,
                &out.sigmas,
            )?;
            let json = AuditJson {
                n_flipped: report.n_flipped,
                inequality_violations: report.inequality_violations,
                higher_norm_fraction: report.higher_norm_fraction,
                seed: cfg.seed,
                sigma_max: cfg.sigma_max,
                output_index: i as u64,
            };
            let audit_path = numbered(&prefix, i, width, ".audit.json");
            write_atomic(&audit_path, |w| {
                serde_json::to_writer_pretty(&mut *w, &json).map_err(std::io::Error::from)?;
                writeln!(w)?;
                Ok(())
            })?;
            line.push_str(&format!(
                " flipped={} violations={} higher_norm_fraction={:.4}",
                report.n_flipped, report.inequality_violations, report.higher_norm_fraction
            ));
        }
        println!("{line}");
    }
    Ok(())
}

pub fn sweep(args: SweepArgs) -> CliResult<()> {
    if args.num < 2 {
        return Err(CliError::Usage("--num must be at least 2 for a sweep".into()));
    }
    if args.sigma_grid.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(CliError::Usage("sigma grid values must be positive".into()));
    }
    if args.sigma_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage("sigma grid must be strictly increasing".into()));
    }
    let base = SwapConfig {
        distribution: args.dist.into(),
        ..base_config(&args.patch)?
    };
    if base.distribution == SigmaDistribution::None {
        return Err(CliError::Usage("a sweep needs a random --dist".into()));
    }
    let (content, style) = load_pair(&args.content, &args.style)?;

    let mut rows = Vec::with_capacity(args.sigma_grid.len());
    for &sigma_max in &args.sigma_grid {
        let cfg = SwapConfig { sigma_max, ..base };
        let outputs = (0..args.num as u64)
            .into_par_iter()
            .map(|i| div_swap(&content, &style, &cfg.with_output_index(i)).map(|o| o.output))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((sigma_max, feature_report(&outputs)?.mean));
    }

    let emit = |w: &mut dyn Write| -> CliResult<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["sigma_max", "mean_feature_distance"])?;
        for (s, m) in &rows {
            csv.write_record([s.to_string(), m.to_string()])?;
        }
        csv.flush()?;
        Ok(())
    };
    match &args.out {
        None => emit(&mut std::io::stdout().lock()),
        Some(out) => {
            let path = if out.extension().is_some_and(|e| e == "csv") {
                out.clone()
            } else {
                fs::create_dir_all(out)?;
                out.join("sweep.csv")
            };
            write_atomic(&path, emit)
        }
    }
}

fn has_ext(p: &Path, ext: &str) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

pub fn metrics(args: MetricsArgs) -> CliResult<()> {
    let (files, kind) = if args.inputs.len() == 1 && args.inputs[0].is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(&args.inputs[0])?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        entries.sort();
        let kind = args.kind.unwrap_or_else(|| {
            let any_png = entries.iter().any(|p| has_ext(p, "png"));
            let any_dsfm = entries.iter().any(|p| has_ext(p, "dsfm"));
            if any_dsfm && !any_png {
                KindArg::Feature
            } else {
                KindArg::Pixel
            }
        });
        let ext = if kind == KindArg::Feature { "dsfm" } else { "png" };
        (
            entries.into_iter().filter(|p| has_ext(p, ext)).collect::<Vec<_>>(),
            kind,
        )
    } else {
        let kind = args.kind.unwrap_or(if has_ext(&args.inputs[0], "dsfm") {
            KindArg::Feature
        } else {
            KindArg::Pixel
        });
        (args.inputs.clone(), kind)
    };
    if files.len() < 2 {
        return Err(CliError::Usage(format!(
            "need at least 2 inputs, found {}",
            files.len()
        )));
    }

    let report = match kind {
        KindArg::Pixel => {
            let images = files.iter().map(load_png).collect::<Result<Vec<_>, _>>()?;
            pixel_report(&images)?
        }
        KindArg::Feature => {
            let maps = files
                .iter()
                .map(load_feature_map)
                .collect::<Result<Vec<_>, _>>()?;
            feature_report(&maps)?
        }
    };
    if args.json {
        println!("{}", report.to_json_line());
    } else {
        println!("{report}");
    }
    Ok(())
}

fn parse_size(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Usage(format!("--size expects WxH, got {s:?}"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

pub fn heatmap(args: HeatmapArgs) -> CliResult<()> {
    let size = args.size.as_deref().map(parse_size).transpose()?;
    let map = load_feature_map(&args.input)?;
    let (w, h) = size.unwrap_or((map.width(), map.height()));
    let img = heatmap_png(&map, w, h)?;
    save_png(&img, &args.output)?;
    println!("{}  {w}x{h}", args.output.display());
    Ok(())
}

pub fn match_table(args: MatchTableArgs) -> CliResult<()> {
    let cfg = swap_config(&args.patch, &args.sigma)?;
    let (content, style) = load_pair(&args.content, &args.style)?;
    let out = div_swap(&content, &style, &cfg)?;
    write_atomic(&args.output, |w| Ok(write_match_csv(&out.matches, w)?))?;
    println!(
        "{}  {} content patches",
        args.output.display(),
        out.matches.len()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(parse_size("64x32").unwrap(), (64, 32));
        assert!(parse_size("64").is_err());
        assert!(parse_size("0x3").is_err());
    }

    #[test]
    fn numbering_pads() {
        let p = numbered(Path::new("/tmp/out/swap"), 7, 3, ".dsfm");
        assert_eq!(p, Path::new("/tmp/out/swap_007.dsfm"));
        let p = numbered(Path::new("x"), 12, 4, ".audit.json");
        assert_eq!(p, Path::new("x_0012.audit.json"));
    }
}
