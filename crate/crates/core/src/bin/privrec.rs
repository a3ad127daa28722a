use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use privrec::artifacts::{
    read_recommendations, write_recommendations, Checkpoint, CHECKPOINT_VERSION,
};
use privrec::attack::{AttackerKind, Attribute, F1Average};
use privrec::config::{FileConfig, CONFIG_ENV};
use privrec::data::{Dataset, FeatureMatrix, SchemaDocument};
use privrec::experiment::{
    attack_at_k, model_features, prepare, recommend_lists, run_experiment, stream_rng, to_f32,
    train_model, write_csv, write_f1_table, write_json, ExperimentPlan, SweepAxis, Variant,
    DEFAULT_KS, DEFAULT_SPLIT_RATIO, STREAM_PERTURB, STREAM_TRAIN,
};
use privrec::ldp::perturb_matrix;
use privrec::metrics::{hit_at_k, ndcg_at_k, HitMode};
use privrec::model::{train, TrainConfig, UNIT_INIT_STD};
use privrec::{Error, Result};

#[derive(Parser)]
#[command(
    name = "privrec",
    version,
    about = "Privacy-preserving graph recommendation"
)]
struct Cli {
    /// Key-value configuration file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Directory holding u.data and u.user.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split interactions and write normalized user features.
    Ingest {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Locally perturb a feature file.
    PerturbFeatures {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epsilon_local: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Train a model and write a checkpoint.
    Train {
        #[command(flatten)]
        train: TrainFlags,
        /// Use these user vectors as given instead of building them.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long, default_value = "checkpoint.json")]
        out: PathBuf,
    },
    /// Write top-K lists from a checkpoint.
    Recommend {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value = "recommendations.tsv")]
        out: PathBuf,
    },
    /// Attribute inference attack on a recommendation file.
    Attack {
        #[arg(long)]
        recs: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "age,gender,occupation")]
        attribute: Vec<Attribute>,
        #[arg(long, value_delimiter = ',', default_value = "nn")]
        attacker: Vec<AttackerKind>,
        /// Prefix length of each list to expose; defaults to the full list.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value = "weighted")]
        f1_average: F1Average,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Score a recommendation file, or run the full pipeline over seeds.
    Evaluate {
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        exp: ExperimentFlags,
        /// Score this file against the held-out split instead of training.
        #[arg(long)]
        recs: Option<PathBuf>,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "GCN,GERAI,GERAI-NL,GERAI-NF"
        )]
        variant: Vec<Variant>,
    },
    /// Run the pipeline along one hyperparameter axis.
    Sweep {
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        exp: ExperimentFlags,
        #[arg(long)]
        axis: SweepAxis,
        /// Axis values; defaults to the standard grid for the axis.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "GERAI")]
        variant: Vec<Variant>,
    },
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    epsilon_local: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_feature_perturbation: bool,
    #[arg(long)]
    no_loss_perturbation: bool,
    /// Initialize with unit-variance Gaussians.
    #[arg(long)]
    paper_init: bool,
}

#[derive(Args)]
struct ExperimentFlags {
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "age,gender,occupation")]
    attribute: Vec<Attribute>,
    #[arg(long, value_delimiter = ',', default_value = "nn")]
    attacker: Vec<AttackerKind>,
    #[arg(long, default_value = "weighted")]
    f1_average: F1Average,
    #[arg(long, default_value = "user")]
    hit_mode: HitMode,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

struct Context {
    file: FileConfig,
    data_dir: PathBuf,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let data_dir = cli
            .data
            .clone()
            .or_else(|| file.data_dir.clone())
            .unwrap_or_else(|| PathBuf::from("data/ml-100k"));
        Ok(Context { file, data_dir })
    }

    fn dataset(&self) -> Result<Dataset> {
        Dataset::load_dir(&self.data_dir).map_err(|e| e.in_stage("ingest"))
    }

    fn split_ratio(&self) -> f64 {
        self.file.split_ratio.unwrap_or(DEFAULT_SPLIT_RATIO)
    }

    fn train_config(&self, flags: &TrainFlags) -> Result<TrainConfig> {
        let mut c = TrainConfig::default();
        self.file.apply(&mut c);
        macro_rules! flag {
            ($($src:ident => $dst:ident),*) => {$(
                if let Some(v) = flags.$src {
                    c.$dst = v;
                }
            )*};
        }
        flag!(epsilon => epsilon, epsilon_local => epsilon_local, dim => dim, lr => lr,
              batch => batch_size, gamma => gamma, epochs => epochs, seed => seed);
        if flags.no_feature_perturbation {
            c.use_feature_perturbation = false;
        }
        if flags.no_loss_perturbation {
            c.use_loss_perturbation = false;
        }
        if flags.paper_init {
            c.init_std = UNIT_INIT_STD;
        }
        c.validate()?;
        Ok(c)
    }

    fn plan(&self, flags: &ExperimentFlags, variants: Vec<Variant>) -> ExperimentPlan {
        ExperimentPlan {
            variants,
            ks: if flags.k.is_empty() {
                DEFAULT_KS.to_vec()
            } else {
                flags.k.clone()
            },
            seeds: if flags.seeds.is_empty() {
                ExperimentPlan::default().seeds
            } else {
                flags.seeds.clone()
            },
            attributes: flags.attribute.clone(),
            attackers: flags.attacker.clone(),
            f1_average: flags.f1_average,
            hit_mode: flags.hit_mode,
            split_ratio: self.split_ratio(),
            ..Default::default()
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_reports(out: &Path, reports: &[privrec::experiment::MetricsReport]) -> Result<()> {
    write_csv(reports, create(&out.join("report.csv"))?)?;
    write_json(reports, create(&out.join("report.json"))?)?;
    write_f1_table(reports, create(&out.join("f1_table.csv"))?)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct AttackLine {
    attribute: Attribute,
    attacker: AttackerKind,
    k: usize,
    f1_average: F1Average,
    f1: f64,
}

#[derive(Serialize)]
struct RankingLine {
    k: usize,
    hit: f64,
    ndcg: f64,
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Context::new(&cli)?;
    match cli.command {
        Command::Ingest { out, seed } => {
            let data = ctx.dataset()?;
            let prepared =
                prepare(&data, ctx.split_ratio(), seed).map_err(|e| e.in_stage("features"))?;
            prepared.features.write_csv(
                &prepared.schema,
                &data.log.users,
                create(&out.join("features.csv"))?,
            )?;
            let doc = SchemaDocument::new(&prepared.schema, &prepared.stats);
            serde_json::to_writer_pretty(create(&out.join("schema.json"))?, &doc)?;
            print_json(&serde_json::json!({
                "users": data.graph.num_users,
                "items": data.graph.num_items,
                "interactions": data.graph.num_edges(),
                "train_edges": prepared.split.train.num_edges(),
                "test_edges": prepared.split.num_test_edges(),
                "d0": prepared.schema.d0(),
                "d_prime": prepared.schema.d_prime(),
            }))?;
        }
        Command::PerturbFeatures {
            features,
            schema,
            out,
            epsilon_local,
            seed,
        } => {
            let doc: SchemaDocument =
                serde_json::from_reader(BufReader::new(File::open(&schema)?))?;
            let schema = doc.features;
            let (matrix, users) =
                FeatureMatrix::read_csv(&schema, BufReader::new(File::open(&features)?))?;
            let eps = epsilon_local
                .or(ctx.file.epsilon_local)
                .unwrap_or(TrainConfig::default().epsilon_local);
            let perturbed =
                perturb_matrix(&matrix, &schema, eps, &mut stream_rng(seed, STREAM_PERTURB))?;
            perturbed.write_csv(&schema, &users, create(&out)?)?;
        }
        Command::Train {
            train: flags,
            features,
            out,
        } => {
            let config = ctx.train_config(&flags)?;
            let data = ctx.dataset()?;
            let prepared = prepare(&data, ctx.split_ratio(), config.seed)
                .map_err(|e| e.in_stage("features"))?;
            let (used, outcome) = match features {
                Some(path) => {
                    let (m, users) = FeatureMatrix::read_csv(
                        &prepared.schema,
                        BufReader::new(File::open(&path)?),
                    )?;
                    if users.raw_ids() != data.log.users.raw_ids() {
                        return Err(Error::Validation(
                            "feature file users do not match the interaction log".into(),
                        ));
                    }
                    let x = to_f32(&m);
                    let outcome = train(
                        &prepared.split.train,
                        &data.graph,
                        x.view(),
                        &config,
                        &mut stream_rng(config.seed, STREAM_TRAIN),
                    )
                    .map_err(|e| e.in_stage("train"))?;
                    (m, outcome)
                }
                None => {
                    let m = model_features(&prepared, &config, config.seed)?;
                    let outcome = train_model(&data, &prepared.split, &m, &config, config.seed)?;
                    (m, outcome)
                }
            };
            for s in &outcome.history {
                eprintln!("epoch {:>3}  loss {:.6}", s.epoch, s.mean_loss);
            }
            Checkpoint {
                version: CHECKPOINT_VERSION,
                config,
                split_ratio: ctx.split_ratio(),
                params: outcome.params.cast(),
                noise: outcome.noise,
                features: used,
                users: data.log.users.clone(),
                items: data.log.items.clone(),
                history: outcome.history,
            }
            .write(create(&out)?)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Recommend { checkpoint, k, out } => {
            let ck = Checkpoint::read(BufReader::new(File::open(&checkpoint)?))?;
            let data = ctx.dataset()?;
            if data.log.users.raw_ids() != ck.users.raw_ids()
                || data.log.items.raw_ids() != ck.items.raw_ids()
            {
                return Err(Error::Validation(
                    "checkpoint ids do not match the data".into(),
                ));
            }
            let prepared = prepare(&data, ck.split_ratio, ck.config.seed)?;
            let lists = recommend_lists(
                &ck.params.cast(),
                &prepared.split.train,
                &ck.features,
                &ck.config,
                k,
            )?;
            let mut w = create(&out)?;
            write_recommendations(&lists, &ck.users, &ck.items, &mut w)?;
            w.flush()?;
            eprintln!("wrote {}", out.display());
        }
        Command::Attack {
            recs,
            attribute,
            attacker,
            k,
            f1_average,
            seed,
        } => {
            let data = ctx.dataset()?;
            let lists = read_recommendations(
                BufReader::new(File::open(&recs)?),
                &data.log.users,
                &data.log.items,
            )?;
            let k = k.unwrap_or_else(|| lists.iter().map(Vec::len).max().unwrap_or(0));
            let mut rows = Vec::new();
            for &a in &attribute {
                for &kind in &attacker {
                    let f1 = attack_at_k(&data, &lists, k, a, kind, f1_average, seed)?;
                    rows.push(AttackLine {
                        attribute: a,
                        attacker: kind,
                        k,
                        f1_average,
                        f1,
                    });
                }
            }
            print_json(&rows)?;
        }
        Command::Evaluate {
            train: flags,
            exp,
            recs,
            variant,
        } => {
            let config = ctx.train_config(&flags)?;
            let data = ctx.dataset()?;
            let plan = ctx.plan(&exp, variant);
            match recs {
                Some(path) => {
                    let prepared = prepare(&data, ctx.split_ratio(), config.seed)?;
                    let lists = read_recommendations(
                        BufReader::new(File::open(&path)?),
                        &data.log.users,
                        &data.log.items,
                    )?;
                    let mut rows = Vec::new();
                    let mut ks = plan.ks.clone();
                    ks.sort_unstable();
                    for k in ks {
                        rows.push(RankingLine {
                            k,
                            hit: hit_at_k(&lists, &prepared.split.test, k, plan.hit_mode)?,
                            ndcg: ndcg_at_k(&lists, &prepared.split.test, k)?,
                        });
                    }
                    print_json(&rows)?;
                }
                None => {
                    let reports = run_experiment(&data, &plan, &config)?;
                    write_reports(&exp.out, &reports)?;
                }
            }
        }
        Command::Sweep {
            train: flags,
            exp,
            axis,
            values,
            variant,
        } => {
            let config = ctx.train_config(&flags)?;
            let data = ctx.dataset()?;
            let values = if values.is_empty() {
                axis.default_values()
            } else {
                values
            };
            let plan = ExperimentPlan {
                sweep: Some((axis, values)),
                ..ctx.plan(&exp, variant)
            };
            let reports = run_experiment(&data, &plan, &config)?;
            write_reports(&exp.out, &reports)?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
