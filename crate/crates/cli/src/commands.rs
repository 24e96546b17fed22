use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use concept_bridge::features::{
    describe_file, extract_features, read_activations, read_features, write_activations, write_features,
    ActivationMatrix, FeatureMatrix, SMode, TokenMode,
};
use concept_bridge::linalg::TileConfig;
use concept_bridge::sae::{load_checkpoint, save_checkpoint, train_sae, TrainConfig};
use concept_bridge::sharedness::{write_manifest_json, write_ranking_csv, SharednessRanking};
use concept_bridge::similarity::{
    concat_layers, estimate_flops, layerwise_grid, mppc_pair, write_grid_csv, write_pair_json, write_table_csv,
    write_table_json, MppcResult, WmppcTable,
};
use concept_bridge::stats::{shuffle_baseline as shuffled_mppc, SignificanceQuery, SignificanceReport};
use concept_bridge::synth::DictionaryTask;
use concept_bridge::Error;
use serde::Serialize;

use crate::config::ConfigFile;
use crate::{CliError, TileArgs};

type CliResult = Result<(), CliError>;

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(Error::Io {
            path: path.to_path_buf(),
            source: e,
        }))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> CliResult {
    w.flush().map_err(|e| {
        CliError::Data(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    w.write_all(b"\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    finish(w, path)
}

fn out_path(file: &ConfigFile, flag: Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
    Ok(file
        .resolve_opt("out", flag.map(|p| p.display().to_string()))?
        .map(PathBuf::from))
}

fn required_out(file: &ConfigFile, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    out_path(file, flag)?.ok_or_else(|| usage("an output path is required (--out or `out` in the config)"))
}

fn tile(args: &TileArgs, file: &ConfigFile) -> Result<TileConfig, CliError> {
    let d = TileConfig::default();
    TileConfig::new(
        file.resolve("tile_rows", args.tile_rows, d.tile_rows)?,
        file.resolve("tile_cols", args.tile_cols, d.tile_cols)?,
        file.resolve("inner_block", args.inner_block, d.inner_block)?,
    )
    .map_err(usage)
}

/// Loads one feature file, or several layers of one model joined column-wise.
fn load_features(paths: &[PathBuf]) -> Result<FeatureMatrix, CliError> {
    let fms = paths.iter().map(read_features).collect::<Result<Vec<_>, _>>()?;
    match fms.len() {
        0 => Err(usage("at least one feature file is required")),
        1 => Ok(fms.into_iter().next().unwrap()),
        _ => Ok(concat_layers(&fms)?),
    }
}

/// Six decimals for correlations, six significant digits elsewhere.
fn corr(v: f64) -> String {
    format!("{v:.6}")
}

fn sig6(v: f64) -> String {
    format!("{v:.5e}")
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    acts: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the training report (per-epoch and per-step MSE) as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    expansion: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    adam_epsilon: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sigma_tol: Option<f64>,
}

pub fn train(a: TrainArgs, file: &ConfigFile) -> CliResult {
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: file.resolve("lr", a.lr, d.learning_rate)?,
        beta1: file.resolve("beta1", a.beta1, d.beta1)?,
        beta2: file.resolve("beta2", a.beta2, d.beta2)?,
        adam_epsilon: file.resolve("adam_epsilon", a.adam_epsilon, d.adam_epsilon)?,
        batch_size: file.resolve("batch_size", a.batch_size, d.batch_size)?,
        epochs: file.resolve("epochs", a.epochs, d.epochs)?,
        expansion_factor: file.resolve("expansion", a.expansion, d.expansion_factor)?,
        k: file.resolve("k", a.k, d.k)?,
        seed: file.resolve("seed", a.seed, d.seed)?,
        sigma_tol: file.resolve("sigma_tol", a.sigma_tol, d.sigma_tol)?,
    };
    cfg.validate().map_err(usage)?;
    let out = required_out(file, a.out)?;
    let acts = read_activations(&a.acts)?;
    log::info!(
        "training on {} rows of {}:{} (D={})",
        acts.data.rows(),
        acts.model_id,
        acts.layer,
        acts.data.cols()
    );
    let (params, report) = train_sae(&acts, &cfg)?;
    for (e, mse) in report.epoch_mse.iter().enumerate() {
        println!("epoch {}/{} mse={}", e + 1, cfg.epochs, sig6(*mse));
    }
    println!("dead_latents={}", report.dead_latents);
    save_checkpoint(&out, &params, Some(&cfg))?;
    if let Some(path) = a.report {
        write_json(&path, &report)?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    #[arg(long)]
    sae: PathBuf,
    #[arg(long)]
    acts: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// raw, relu or post_topk.
    #[arg(long)]
    s_mode: Option<SMode>,
}

pub fn features(a: FeaturesArgs, file: &ConfigFile) -> CliResult {
    let s_mode = file.resolve("s_mode", a.s_mode, SMode::Raw)?;
    let out = required_out(file, a.out)?;
    let (params, _) = load_checkpoint(&a.sae)?;
    let acts = read_activations(&a.acts)?;
    let fm = extract_features(&params, &acts, s_mode)?;
    write_features(&out, &fm)?;
    println!(
        "wrote {} ({} samples x {} features, s_mode={s_mode})",
        out.display(),
        fm.n_samples(),
        fm.n_features()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct WmppcArgs {
    /// Source features; repeat to join several layers of one model.
    #[arg(long, required = true)]
    src: Vec<PathBuf>,
    /// Target features; repeat to join several layers of one model.
    #[arg(long, required = true)]
    tgt: Vec<PathBuf>,
    /// Write the full result (ρ, argmax, aggregates) as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tile: TileArgs,
}

fn print_pair(r: &MppcResult) {
    println!(
        "{} -> {}: mppc={} wmppc={} n_samples={} dead_source={}",
        r.source_id,
        r.target_id,
        corr(r.mppc),
        corr(r.wmppc),
        r.n_samples,
        r.dead_source_count
    );
}

fn write_pair(path: &Path, r: &MppcResult, cfg: &TileConfig) -> CliResult {
    let mut w = create(path)?;
    write_pair_json(&mut w, r, cfg)?;
    finish(w, path)
}

pub fn wmppc(a: WmppcArgs, file: &ConfigFile) -> CliResult {
    let cfg = tile(&a.tile, file)?;
    let out = out_path(file, a.out)?;
    let src = load_features(&a.src)?;
    let tgt = load_features(&a.tgt)?;
    let r = mppc_pair(&src, &tgt, &cfg)?;
    print_pair(&r);
    if let Some(path) = out {
        write_pair(&path, &r, &cfg)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct GridArgs {
    /// One feature file per source layer, in order.
    #[arg(long, required = true)]
    src: Vec<PathBuf>,
    /// One feature file per target layer, in order.
    #[arg(long, required = true)]
    tgt: Vec<PathBuf>,
    /// Heatmap CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tile: TileArgs,
}

pub fn grid(a: GridArgs, file: &ConfigFile) -> CliResult {
    let cfg = tile(&a.tile, file)?;
    let out = required_out(file, a.out)?;
    let src = a.src.iter().map(read_features).collect::<Result<Vec<_>, _>>()?;
    let tgt = a.tgt.iter().map(read_features).collect::<Result<Vec<_>, _>>()?;
    let grid = layerwise_grid(&src, &tgt, &cfg)?;
    for (i, layer) in grid.src_layers.iter().enumerate() {
        let row: Vec<String> = (0..grid.tgt_layers.len()).map(|j| corr(grid.get(i, j))).collect();
        println!("{}:{layer} {}", grid.source_id, row.join(" "));
    }
    let mut w = create(&out)?;
    write_grid_csv(&mut w, &grid)?;
    finish(w, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct RankingOutputs {
    /// Share of features to keep at the top of the ranking.
    #[arg(long)]
    fraction: Option<f64>,
    /// Ranking CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON listing the top-activating samples of each top feature.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    samples_per_feature: Option<usize>,
    #[command(flatten)]
    tile: TileArgs,
}

struct RankingSetup {
    fraction: f64,
    out: PathBuf,
    samples: usize,
    tile: TileConfig,
}

fn ranking_setup(o: &RankingOutputs, file: &ConfigFile) -> Result<RankingSetup, CliError> {
    let fraction = file.resolve("fraction", o.fraction, 0.01)?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(usage(format!("fraction must be in (0, 1], got {fraction}")));
    }
    Ok(RankingSetup {
        fraction,
        out: required_out(file, o.out.clone())?,
        samples: file.resolve("samples_per_feature", o.samples_per_feature, 9)?,
        tile: tile(&o.tile, file)?,
    })
}

fn emit_ranking(r: &SharednessRanking, src: &FeatureMatrix, setup: &RankingSetup, manifest: Option<&Path>) -> CliResult {
    let mut w = create(&setup.out)?;
    write_ranking_csv(&mut w, r)?;
    finish(w, &setup.out)?;
    if let Some(path) = manifest {
        let mut w = create(path)?;
        write_manifest_json(&mut w, r, src, setup.samples)?;
        finish(w, path)?;
    }
    let shown: Vec<String> = r.top_indices.iter().take(10).map(|i| i.to_string()).collect();
    println!(
        "top {} of {} features: {}{}",
        r.top_indices.len(),
        r.delta.len(),
        shown.join(" "),
        if r.top_indices.len() > 10 { " ..." } else { "" }
    );
    println!("wrote {}", setup.out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct SharednessArgs {
    /// Features of the model whose concepts are ranked.
    #[arg(long)]
    src: PathBuf,
    /// Model the features should be shared with.
    #[arg(long)]
    a: PathBuf,
    /// Model the features should not be shared with.
    #[arg(long)]
    b: PathBuf,
    #[command(flatten)]
    outputs: RankingOutputs,
}

pub fn sharedness(a: SharednessArgs, file: &ConfigFile) -> CliResult {
    let setup = ranking_setup(&a.outputs, file)?;
    let src = read_features(&a.src)?;
    let ra = read_features(&a.a)?;
    let rb = read_features(&a.b)?;
    let r = SharednessRanking::pairwise(&src, &ra, &rb, setup.fraction, &setup.tile)?;
    emit_ranking(&r, &src, &setup, a.outputs.manifest.as_deref())
}

#[derive(Args, Debug)]
pub struct GcsArgs {
    #[arg(long)]
    src: PathBuf,
    /// Members of the group every top feature must be shared with.
    #[arg(long, required = true)]
    g: Vec<PathBuf>,
    /// Members of the group no top feature may be shared with.
    #[arg(long, required = true)]
    h: Vec<PathBuf>,
    #[command(flatten)]
    outputs: RankingOutputs,
}

pub fn gcs(a: GcsArgs, file: &ConfigFile) -> CliResult {
    let setup = ranking_setup(&a.outputs, file)?;
    let src = read_features(&a.src)?;
    let g = a.g.iter().map(read_features).collect::<Result<Vec<_>, _>>()?;
    let h = a.h.iter().map(read_features).collect::<Result<Vec<_>, _>>()?;
    let r = SharednessRanking::build(&src, &g, &h, setup.fraction, &setup.tile)?;
    emit_ranking(&r, &src, &setup, a.outputs.manifest.as_deref())
}

#[derive(Args, Debug)]
pub struct SignificanceArgs {
    /// Correlation threshold.
    #[arg(long, allow_negative_numbers = true)]
    x: f64,
    /// Number of target features the maximum is taken over.
    #[arg(long)]
    n_targets: u64,
    /// Number of aligned samples each correlation uses.
    #[arg(long)]
    n_samples: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn significance(a: SignificanceArgs, file: &ConfigFile) -> CliResult {
    let q = SignificanceQuery::new(a.x, a.n_targets, a.n_samples).map_err(usage)?;
    let report = SignificanceReport::new(&q);
    println!(
        "P(rho > {}) over N={} targets, L={} samples: log10_p={}",
        a.x,
        a.n_targets,
        a.n_samples,
        sig6(report.log10_p)
    );
    if let Some(path) = out_path(file, a.out)? {
        write_json(&path, &report)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ShuffleArgs {
    #[arg(long, required = true)]
    src: Vec<PathBuf>,
    #[arg(long, required = true)]
    tgt: Vec<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Shuffled result as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tile: TileArgs,
}

pub fn shuffle_baseline(a: ShuffleArgs, file: &ConfigFile) -> CliResult {
    let cfg = tile(&a.tile, file)?;
    let seed = file.resolve("seed", a.seed, 0)?;
    let out = out_path(file, a.out)?;
    let src = load_features(&a.src)?;
    let tgt = load_features(&a.tgt)?;
    let base = mppc_pair(&src, &tgt, &cfg)?;
    let shuffled = shuffled_mppc(&src, &tgt, seed, &cfg)?;
    print_pair(&base);
    print_pair(&shuffled);
    println!("ratio={}", sig6(base.wmppc / shuffled.wmppc));
    if let Some(path) = out {
        write_pair(&path, &shuffled, &cfg)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct FlopsArgs {
    /// Total source features (layers × features per layer).
    #[arg(long)]
    src_features: u64,
    #[arg(long)]
    tgt_features: u64,
    /// Number of aligned samples.
    #[arg(long)]
    n: u64,
}

pub fn flops(a: FlopsArgs) -> CliResult {
    let f = estimate_flops(a.src_features, a.tgt_features, a.n).map_err(usage)?;
    println!("{} ({f} FLOPs)", sig6(f as f64));
    Ok(())
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Feature files, one per model (or model-layer).
    #[arg(long = "feat", required = true)]
    feats: Vec<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    tile: TileArgs,
}

pub fn report(a: ReportArgs, file: &ConfigFile) -> CliResult {
    if a.csv.is_none() && a.json.is_none() {
        return Err(usage("report needs --csv, --json or both"));
    }
    let cfg = tile(&a.tile, file)?;
    let fms = a.feats.iter().map(read_features).collect::<Result<Vec<_>, _>>()?;
    let table = WmppcTable::build(&fms, &cfg)?;
    for (i, id) in table.ids.iter().enumerate() {
        let row: Vec<String> = (0..table.ids.len()).map(|j| corr(table.get(i, j))).collect();
        println!("{id} {}", row.join(" "));
    }
    if let Some(path) = &a.csv {
        let mut w = create(path)?;
        write_table_csv(&mut w, &table)?;
        finish(w, path)?;
    }
    if let Some(path) = &a.json {
        let mut w = create(path)?;
        write_table_json(&mut w, &table)?;
        finish(w, path)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// `.acts`, `.feat` or `.sae` files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

pub fn inspect(a: InspectArgs) -> CliResult {
    for path in &a.files {
        let desc = describe_file(path)?;
        let text = serde_json::to_string_pretty(&desc).map_err(Error::from)?;
        println!("{}: {text}", path.display());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Activation dimension.
    #[arg(long)]
    d: usize,
    /// Number of ground-truth dictionary atoms.
    #[arg(long)]
    atoms: usize,
    /// Atoms combined per row.
    #[arg(long)]
    k_active: usize,
    /// Rows to write.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Seed of the dictionary itself; keep it fixed to sample more rows of
    /// the same task.
    #[arg(long, default_value_t = 0)]
    dictionary_seed: u64,
    #[arg(long, default_value = "synthetic")]
    model: String,
    #[arg(long, default_value_t = 0)]
    layer: u32,
    #[arg(long, default_value = "synthetic")]
    dataset: String,
    #[arg(long, default_value = "all_tokens")]
    token_mode: TokenMode,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn synth(a: SynthArgs, file: &ConfigFile) -> CliResult {
    if a.d == 0 || a.atoms == 0 || !(1..=a.atoms).contains(&a.k_active) {
        return Err(usage("synth needs d > 0, atoms > 0 and 1 <= k-active <= atoms"));
    }
    let seed = file.resolve("seed", a.seed, 0)?;
    let out = required_out(file, a.out)?;
    let task = DictionaryTask::with_dictionary_seed(a.d, a.atoms, a.k_active, a.dictionary_seed);
    let data = task.sample(a.n, seed).map_err(usage)?;
    let mut acts = ActivationMatrix::new(data, a.model, a.layer, a.dataset, a.token_mode)?;
    if a.token_mode == TokenMode::GlobalOnly {
        acts = acts.with_global_token_kind("synthetic");
    }
    write_activations(&out, &acts)?;
    println!("wrote {} ({} x {})", out.display(), a.n, a.d);
    Ok(())
}
