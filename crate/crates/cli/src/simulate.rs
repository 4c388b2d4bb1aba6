use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use bipcover::bounds::BoundSpec;
use bipcover::mscsim::{overestimation_experiment, CoverExperimentResult, DEFAULT_GENE_CAP};
use bipcover::rng::derive_seed;
use bipcover::treegen::{balanced, caterpillar, yule, SpeciesTree};
use bipcover::Error;
use clap::{Args, ValueEnum};

use crate::sweep::SCHEMA_LINE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TreeKind {
    Caterpillar,
    Balanced,
    Yule,
    Newick,
}

impl TreeKind {
    fn name(self) -> &'static str {
        match self {
            TreeKind::Caterpillar => "caterpillar",
            TreeKind::Balanced => "balanced",
            TreeKind::Yule => "yule",
            TreeKind::Newick => "newick",
        }
    }
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub tree: TreeKind,
    /// Newick file, required with `--tree newick`.
    #[arg(long, required_if_eq("tree", "newick"))]
    pub newick: Option<PathBuf>,
    /// Species count (taken from the file for `--tree newick`).
    #[arg(short)]
    pub k: Option<usize>,
    /// Minimum internal branch length (taken from the file for `--tree newick`).
    #[arg(short = 't', long = "t-min")]
    pub t_min: Option<f64>,
    #[arg(short, default_value_t = 0.9)]
    pub q: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Rows to produce; above 1 each row gets a seed derived from `--seed`.
    #[arg(long, default_value_t = 1)]
    pub replicates: u64,
    /// Per-trial cap on simulated gene trees.
    #[arg(long, default_value_t = DEFAULT_GENE_CAP)]
    pub max_genes: u64,
    /// Output file (default: stdout).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub struct Row {
    pub kind: TreeKind,
    pub spec: BoundSpec,
    pub trials: usize,
    pub seed: u64,
    pub result: Option<CoverExperimentResult>,
    pub capped: Option<usize>,
    pub error: Option<String>,
}

impl SimulateArgs {
    fn spec_and_file_tree(&self) -> Result<(BoundSpec, Option<SpeciesTree>)> {
        if self.tree != TreeKind::Newick {
            if self.newick.is_some() {
                bail!("--newick only applies to --tree newick");
            }
            let k = self.k.context("-k is required")?;
            let t = self.t_min.context("--t-min is required")?;
            return Ok((BoundSpec::new(k, t, self.q)?, None));
        }
        let path = self.newick.as_ref().context("--newick is required")?;
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let tree = SpeciesTree::from_newick(&text)?;
        let k = tree.leaf_count();
        let tree_min = tree.internal_min_branch().context("tree has no internal branches")?;
        if let Some(given) = self.k.filter(|&given| given != k) {
            bail!("-k {given} but the tree has {k} leaves");
        }
        if let Some(t) = self.t_min {
            if (t - tree_min).abs() > 1e-9 * t {
                bail!("--t-min {t} but the tree's shortest internal branch is {tree_min}");
            }
        }
        Ok((BoundSpec::new(k, tree_min, self.q)?, Some(tree)))
    }

    /// Validates the arguments, then runs one experiment per replicate.
    pub fn run(&self) -> Result<Vec<Row>> {
        if self.replicates == 0 {
            bail!("--replicates must be positive");
        }
        if self.max_genes == 0 {
            bail!("--max-genes must be positive");
        }
        let (spec, file_tree) = self.spec_and_file_tree()?;
        spec.validate()?;
        let rows = (0..self.replicates)
            .map(|r| {
                let seed = if self.replicates == 1 { self.seed } else { derive_seed(self.seed, r) };
                let outcome = match self.tree {
                    TreeKind::Caterpillar => caterpillar(spec.k, spec.t_min),
                    TreeKind::Balanced => balanced(spec.k, spec.t_min),
                    TreeKind::Yule => yule(spec.k, spec.t_min, seed),
                    TreeKind::Newick => Ok(file_tree.clone().expect("parsed above")),
                }
                .and_then(|tree| overestimation_experiment(&tree, &spec, self.trials, seed, self.max_genes));
                let mut row =
                    Row { kind: self.tree, spec, trials: self.trials, seed, result: None, capped: None, error: None };
                match outcome {
                    Ok(res) => {
                        row.capped = Some(res.capped);
                        row.result = Some(res);
                    }
                    Err(e) => {
                        if let Error::QuantileUndefined { capped, .. } = e {
                            row.capped = Some(capped);
                        }
                        row.error = Some(e.to_string());
                    }
                }
                row
            })
            .collect::<Vec<_>>();
        if let Some(first) = rows.iter().find_map(|r| r.error.as_ref()) {
            if rows.iter().all(|r| r.error.is_some() && r.capped.is_none()) {
                bail!("{first}");
            }
        }
        Ok(rows)
    }
}

pub fn write_csv(rows: &[Row], mut out: impl Write) -> Result<()> {
    writeln!(out, "{SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "tree_kind",
        "k",
        "t_min",
        "q",
        "trials",
        "seed",
        "n_e",
        "m_o",
        "m_b",
        "ratio_o",
        "ratio_b",
        "capped",
        "error",
    ])?;
    for row in rows {
        let mut record = vec![
            row.kind.name().to_string(),
            row.spec.k.to_string(),
            row.spec.t_min.to_string(),
            row.spec.q.to_string(),
            row.trials.to_string(),
            row.seed.to_string(),
        ];
        match &row.result {
            Some(r) => record.extend([
                r.n_e.to_string(),
                r.m_o.to_string(),
                r.m_b.to_string(),
                r.ratio_o.to_string(),
                r.ratio_b.to_string(),
            ]),
            None => record.extend(std::iter::repeat_n(String::new(), 5)),
        }
        record.push(row.capped.map(|c| c.to_string()).unwrap_or_default());
        record.push(row.error.clone().unwrap_or_default());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
