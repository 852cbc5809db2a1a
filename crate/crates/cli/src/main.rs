use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use zsre::config::{load_config, RawConfig, RunConfig};
use zsre::dataset::{self, SyntheticConfig};
use zsre::evaluation::{self, curve_csv, Protocol, SweepAxis};
use zsre::inference::{predict, RelationIndex};
use zsre::model::Model;
use zsre::optim::{self, checkpoint, GradCheckConfig};
use zsre::rng::{derive, offsets, SeededRng};
use zsre::{DescriptionMode, DistKind, HiddenStates, Instance, Preset, RelationTable, Resources, TokenEmbeddings};

#[derive(Parser)]
#[command(name = "zsre", version, about = "Zero-shot relation extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a zero-shot (or few-shot) split and write split.json.
    Split(Common),
    /// Train one model and write checkpoint.json and train_log.jsonl.
    Train(Common),
    /// Run the repeated zero-shot protocol and write report.json.
    Eval(Common),
    /// Predict relations for new instances with a trained checkpoint.
    Predict(Common),
    /// Few-shot curve over `fractions`; writes fewshot.csv and fewshot.json.
    Fewshot(Common),
    /// Sweep gamma, alpha or the distance; writes sweep.csv and sweep.json.
    Sweep(Common),
    /// Compare analytic gradients with finite differences on one batch.
    Gradcheck(Common),
    /// Write the sentence embedding of every instance.
    DumpEmbeddings(Common),
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
}

/// Flags shared by every subcommand except `synth`. Each one overrides the
/// config file key of the same name.
#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    instances: Option<PathBuf>,
    #[arg(long)]
    relations: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    hidden_states: Option<PathBuf>,
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// New instances for `predict`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// nip, euclid or cosine.
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    clip_grad_norm: Option<f64>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    d_attr: Option<usize>,
    #[arg(long)]
    mixing: Option<bool>,
    #[arg(long)]
    encoder_trainable: Option<bool>,
    /// precomputed, hashed or identity.
    #[arg(long)]
    description_mode: Option<String>,
    #[arg(long)]
    description_seed: Option<u64>,
    /// Number of unseen relations.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Comma-separated few-shot fractions, e.g. `0,0.05,0.1`.
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[arg(long)]
    fraction: Option<f64>,
    /// `AXIS=V1,V2,...` with AXIS one of gamma, alpha, dist.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    gradcheck_step: Option<f64>,
    #[arg(long)]
    gradcheck_tol: Option<f64>,
    #[arg(long)]
    gradcheck_batch: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Number of relations.
    #[arg(long, default_value_t = SyntheticConfig::default().n_relations)]
    relations: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().instances_per_relation)]
    per_relation: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = SyntheticConfig::default().vocab_size)]
    vocab_size: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().d_attr)]
    d_attr: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().embed_dim)]
    embed_dim: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().latent_dim)]
    latent_dim: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().noise_scale)]
    noise_scale: f64,
}

fn parse_sweep(s: &str) -> Result<SweepAxis> {
    let (axis, values) = s.split_once('=').context("sweep must look like AXIS=V1,V2")?;
    let nums = || -> Result<Vec<f64>> {
        values.split(',').map(|v| v.trim().parse::<f64>().with_context(|| format!("bad sweep value {v:?}"))).collect()
    };
    Ok(match axis {
        "gamma" => SweepAxis::Gamma(nums()?),
        "alpha" => SweepAxis::Alpha(nums()?),
        "dist" => SweepAxis::Dist(values.split(',').map(|v| v.trim().parse()).collect::<zsre::Result<_>>()?),
        _ => bail!("unknown sweep axis {axis:?} (expected gamma, alpha or dist)"),
    })
}

impl Common {
    fn flags(&self) -> Result<RawConfig> {
        Ok(RawConfig {
            preset: self.preset.as_deref().map(str::parse::<Preset>).transpose()?,
            instances: self.instances.clone(),
            relations: self.relations.clone(),
            out: self.out.clone(),
            embeddings: self.embeddings.clone(),
            hidden_states: self.hidden_states.clone(),
            split: self.split.clone(),
            checkpoint: self.checkpoint.clone(),
            input: self.input.clone(),
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            gamma: self.gamma,
            alpha: self.alpha,
            epochs: self.epochs,
            seed: self.seed,
            dist: self.dist.as_deref().map(str::parse::<DistKind>).transpose()?,
            clip_grad_norm: self.clip_grad_norm,
            hidden_size: self.hidden_size,
            d_attr: self.d_attr,
            mixing: self.mixing,
            encoder_trainable: self.encoder_trainable,
            description_mode: self.description_mode.as_deref().map(str::parse::<DescriptionMode>).transpose()?,
            description_seed: self.description_seed,
            m: self.m,
            repeats: self.repeats,
            fractions: self.fractions.clone(),
            fraction: self.fraction,
            sweep: self.sweep.as_deref().map(parse_sweep).transpose()?,
            jobs: self.jobs,
            eval_every: self.eval_every,
            gradcheck_step: self.gradcheck_step,
            gradcheck_tol: self.gradcheck_tol,
            gradcheck_batch: self.gradcheck_batch,
        })
    }

    /// Resolves the config, creates the output directory and records the
    /// resolved config in it.
    fn resolve(&self) -> Result<(RunConfig, PathBuf)> {
        let cfg = load_config(self.config.as_deref(), &self.flags()?)?;
        cfg.check_paths()?;
        let out = cfg.paths.out.clone().context("no output directory (pass --out or set \"out\" in the config)")?;
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        write_json(&out.join("resolved_config.json"), &cfg.to_raw())?;
        Ok((cfg, out))
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let s = serde_json::to_string_pretty(value)?;
    fs::write(path, s + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn required<'a>(p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    p.as_deref().with_context(|| format!("missing {name} path (pass --{} or set \"{name}\")", name.replace('_', "-")))
}

struct Data {
    instances: Vec<Instance>,
    relations: RelationTable,
    resources: Resources,
}

fn load_resources(cfg: &RunConfig) -> Result<Resources> {
    Ok(Resources {
        embeddings: cfg.paths.embeddings.as_ref().map(TokenEmbeddings::load).transpose()?,
        hidden_states: cfg.paths.hidden_states.as_ref().map(HiddenStates::load).transpose()?,
    })
}

fn load_data(cfg: &RunConfig) -> Result<Data> {
    let instances = dataset::load_instances(required(&cfg.paths.instances, "instances")?)?;
    let relations = dataset::load_relations(required(&cfg.paths.relations, "relations")?, Some(cfg.model.d_attr))?;
    dataset::check_relations(&instances, &relations)?;
    Ok(Data { instances, relations, resources: load_resources(cfg)? })
}

fn protocol<'a>(cfg: &RunConfig, data: &'a Data) -> Protocol<'a> {
    Protocol {
        instances: &data.instances,
        relations: &data.relations,
        train: cfg.train.clone(),
        model: cfg.model.clone(),
        resources: &data.resources,
        jobs: cfg.protocol.jobs,
        eval_every: cfg.protocol.eval_every,
    }
}

fn split_for(cfg: &RunConfig, data: &Data) -> Result<dataset::SplitSpec> {
    match &cfg.paths.split {
        Some(p) => {
            let s = dataset::SplitSpec::load(p)?;
            s.validate(&data.instances)?;
            Ok(s)
        }
        None => Ok(protocol(cfg, data).split(0, cfg.protocol.m, cfg.protocol.fraction)?),
    }
}

fn cmd_split(c: &Common) -> Result<()> {
    let (cfg, out) = c.resolve()?;
    let data = load_data(&cfg)?;
    let split = protocol(&cfg, &data).split(0, cfg.protocol.m, cfg.protocol.fraction)?;
    split.save(out.join("split.json"))?;
    log::info!("unseen relations: {:?}", split.unseen_ids);
    Ok(())
}

fn cmd_train(c: &Common) -> Result<()> {
    let (cfg, out) = c.resolve()?;
    let data = load_data(&cfg)?;
    let split = split_for(&cfg, &data)?;
    split.save(out.join("split.json"))?;
    let log_path = out.join("train_log.jsonl");
    let mut log = fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    let (model, history) = optim::train::<f64>(
        &data.instances,
        &data.relations,
        &split,
        &cfg.train,
        &cfg.model,
        &data.resources,
    )?;
    for rec in &history.epochs {
        writeln!(log, "{}", serde_json::to_string(rec)?)?;
        log::info!("epoch {} total {:.6}", rec.epoch, rec.total);
    }
    checkpoint::save_checkpoint(&model, &cfg.train, out.join("checkpoint.json"))?;
    Ok(())
}

fn cmd_eval(c: &Common) -> Result<()> {
    let (cfg, out) = c.resolve()?;
    let data = load_data(&cfg)?;
    let report = evaluation::run_experiment::<f64>(&protocol(&cfg, &data), cfg.protocol.m, cfg.protocol.repeats)?;
    write_json(&out.join("report.json"), &report)?;
    println!("macro_F1 {:.4} ± {:.4}", report.macro_f1.mean, report.macro_f1.std);
    Ok(())
}

fn cmd_fewshot(c: &Common) -> Result<()> {
    let (cfg, out) = c.resolve()?;
    let data = load_data(&cfg)?;
    let rows = evaluation::run_fewshot_curve::<f64>(
        &protocol(&cfg, &data),
        cfg.protocol.m,
        cfg.protocol.repeats,
        &cfg.protocol.fractions,
    )?;
    let csv = curve_csv(&rows);
    write_text(&out.join("fewshot.csv"), &csv)?;
    write_json(&out.join("fewshot.json"), &rows)?;
    print!("{csv}");
    Ok(())
}

fn cmd_sweep(c: &Common) -> Result<()> {
    let (cfg, out) = c.resolve()?;
    let axis = cfg.protocol.sweep.clone().context("no sweep axis (pass --sweep AXIS=V1,V2 or set \"sweep\")")?;
    let data = load_data(&cfg)?;
    let rows = evaluation::run_sweep::<f64>(&protocol(&cfg, &data), cfg.protocol.m, cfg.protocol.repeats, &axis)?;
    let csv = curve_csv(&rows);
    write_text(&out.join("sweep.csv"), &csv)?;
    write_json(&out.join("sweep.json"), &rows)?;
    print!("{csv}");
    Ok(())
}

fn cmd_predict(c: &Common) -> Result<()> {
    let (cfg, out) = c.resolve()?;
    let (model, _) = checkpoint::load_checkpoint::<f64>(required(&cfg.paths.checkpoint, "checkpoint")?)?;
    let relations =
        dataset::load_relations(required(&cfg.paths.relations, "relations")?, Some(model.config.d_attr))?;
    let instances = dataset::load_instances(required(&cfg.paths.input, "input")?)?;
    let resources = load_resources(&cfg)?;
    let ids: Vec<String> = relations.keys().cloned().collect();
    let index = RelationIndex::<f64>::build(&ids, &relations, &model.config.description_encoder(), cfg.train.dist_kind)?;
    let mut lines = String::new();
    for (i, inst) in instances.iter().enumerate() {
        let a_hat = model.embed(i, inst, resources.hidden_states.as_ref())?;
        let p = predict(&a_hat, &index)?;
        let ranking: Vec<_> = p.ranking.iter().map(|(id, d)| json!({"relation": id, "distance": d})).collect();
        lines += &json!({"index": i, "predicted": p.relation_id, "ranking": ranking}).to_string();
        lines.push('\n');
    }
    write_text(&out.join("predictions.jsonl"), &lines)
}

fn cmd_gradcheck(c: &Common) -> Result<ExitCode> {
    let (cfg, out) = c.resolve()?;
    let data = load_data(&cfg)?;
    let split = split_for(&cfg, &data)?;
    let train_refs: Vec<&Instance> = split.train_idx.iter().map(|&i| &data.instances[i]).collect();
    let model = Model::<f64>::init(
        &cfg.model,
        &train_refs,
        split.train_classes(&data.instances),
        &data.resources,
        derive(cfg.train.seed, offsets::INIT),
    )?;
    let class_attrs = model.class_attributes(&data.relations)?;
    let mut rng = SeededRng::new(derive(cfg.train.seed, offsets::GRADCHECK));
    let b = cfg.gradcheck_batch.min(split.train_idx.len());
    let items: Vec<(usize, &Instance)> = rng
        .sample_indices(split.train_idx.len(), b)
        .into_iter()
        .map(|p| (split.train_idx[p], &data.instances[split.train_idx[p]]))
        .collect();
    let gc = GradCheckConfig { seed: derive(cfg.train.seed, offsets::GRADCHECK), ..cfg.gradcheck };
    let report = optim::grad_check(
        &model,
        &items,
        &class_attrs,
        data.resources.hidden_states.as_ref(),
        cfg.train.gamma,
        cfg.train.alpha,
        &gc,
    )?;
    write_json(&out.join("gradcheck.json"), &report)?;
    print!("{}", report.table());
    if report.passes() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: max relative error {:.3e} exceeds tol {:.1e}", report.max_rel_error(), report.tol);
        Ok(ExitCode::FAILURE)
    }
}

fn cmd_dump(c: &Common) -> Result<()> {
    let (cfg, out) = c.resolve()?;
    let (model, _) = checkpoint::load_checkpoint::<f64>(required(&cfg.paths.checkpoint, "checkpoint")?)?;
    let instances = dataset::load_instances(required(&cfg.paths.instances, "instances")?)?;
    let resources = load_resources(&cfg)?;
    evaluation::dump_embeddings(&model, &instances, &resources, out.join("embeddings.jsonl"))?;
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let config = SyntheticConfig {
        n_relations: a.relations,
        instances_per_relation: a.per_relation,
        seed: a.seed,
        vocab_size: a.vocab_size,
        d_attr: a.d_attr,
        embed_dim: a.embed_dim,
        latent_dim: a.latent_dim,
        noise_scale: a.noise_scale,
        ..SyntheticConfig::default()
    };
    let corpus = dataset::generate_synthetic(&config)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_json(&a.out.join("resolved_config.json"), &config)?;
    dataset::write_instances(a.out.join("instances.jsonl"), &corpus.instances)?;
    dataset::write_relations(a.out.join("relations.jsonl"), &corpus.relations)?;
    corpus.token_embeddings.save(a.out.join("token_embeddings.jsonl"))?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Split(c) => cmd_split(c)?,
        Command::Train(c) => cmd_train(c)?,
        Command::Eval(c) => cmd_eval(c)?,
        Command::Predict(c) => cmd_predict(c)?,
        Command::Fewshot(c) => cmd_fewshot(c)?,
        Command::Sweep(c) => cmd_sweep(c)?,
        Command::Gradcheck(c) => return cmd_gradcheck(c),
        Command::DumpEmbeddings(c) => cmd_dump(c)?,
        Command::Synth(a) => cmd_synth(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ZSRE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("error: invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_syntax() {
        assert_eq!(parse_sweep("gamma=0.5, 7.5").unwrap(), SweepAxis::Gamma(vec![0.5, 7.5]));
        assert_eq!(parse_sweep("alpha=1").unwrap(), SweepAxis::Alpha(vec![1.0]));
        assert_eq!(
            parse_sweep("dist=nip,cosine").unwrap(),
            SweepAxis::Dist(vec![DistKind::NegInnerProduct, DistKind::Cosine])
        );
        assert!(parse_sweep("gamma").is_err());
        assert!(parse_sweep("beta=1").is_err());
        assert!(parse_sweep("gamma=x").is_err());
        assert!(parse_sweep("dist=manhattan").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
