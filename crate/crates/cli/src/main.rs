//! `hdx`: reproducible experiments on complexes, walks, STAVs and agreement tests.
//!
//! Every report is `{"manifest": ..., "result": ...}`. Exit status is 0 on success, 1 on
//! usage or validation errors and 2 when a size cap refuses the work.

mod inputs;
mod report;

use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use hdx_core::agreement::{
    dist_gamma, dl_distribution, rejection, s_marginal, surprise, up2k_distribution, Compare, EvalMode,
};
use hdx_core::decoder::{global_decode, global_decode_checked, partite_decode, DecoderConfig, PartiteConfig};
use hdx_core::grassmann::{
    complement_bound, conditioned_complement_walk, containment_bound, containment_walk, GrassmannPoset, Subspace,
};
use hdx_core::io::complex_to_json;
use hdx_core::spectra::{self, bipartite_norm, link_expansion, mixing_check, square_spectrum};
use hdx_core::stav::{goodness_check, GoodnessConfig, HdxStav};
use hdx_core::walks::{self, MarkovOperator};
use hdx_core::{caps, Complex, Error, Face};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use inputs::{load_complex, EnsembleArgs, FlavorArg, StavArgs, StavKind};
use report::{render, Format, RunManifest};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::SizeCap { .. }) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "hdx", version, about = "Spectral checks, agreement tests and decoding on high-dimensional expanders")]
struct Cli {
    #[arg(long, value_enum, global = true, default_value = "json")]
    format: Format,
    /// write the report here instead of stdout
    #[arg(long, global = true)]
    report: Option<String>,
    /// worker threads (defaults to the available cores); recorded in the manifest
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// record wall time in the manifest (reports are then no longer byte-identical)
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Construct a complex and write it as JSON
    Build(BuildArgs),
    /// Spectrum of one random walk on a complex
    Spectrum(SpectrumArgs),
    /// Run the theorem verifiers on a complex
    Verify(VerifyArgs),
    /// Mixing-lemma check for disjoint face sets
    Mixing(MixingArgs),
    /// Grassmann poset sizes and walk spectra
    Grassmann(GrassmannArgs),
    /// STAV invariants and goodness
    StavCheck(StavCheckArgs),
    /// Rejection probability of an agreement test
    AgreeRun(AgreeRunArgs),
    /// Decode a global function from an ensemble
    Decode(DecodeArgs),
}

#[derive(clap::Args, Debug)]
struct BuildArgs {
    /// complete complex: N vertices, dimension D
    #[arg(long, num_args = 2, value_names = ["N", "D"])]
    complete: Option<Vec<usize>>,
    /// complete partite complex with these part sizes
    #[arg(long, value_delimiter = ',')]
    partite: Vec<usize>,
    /// graphic matroid on edges "a-b,c-d,..."
    #[arg(long)]
    matroid: Option<String>,
    #[arg(long)]
    truncation: Option<usize>,
    /// read a complex instead of constructing one
    #[arg(long)]
    from: Option<String>,
    /// replace the complex by the link of this face ("v1,v2,...")
    #[arg(long)]
    link: Option<String>,
    /// replace the complex by its k-skeleton
    #[arg(long)]
    skeleton: Option<usize>,
    #[arg(short, long)]
    out: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WalkKind {
    Up,
    Down,
    Containment,
    Lower,
    NonLazyUpper,
    Complement,
    Colored,
    FixedUnion,
}

#[derive(clap::Args, Debug)]
struct SpectrumArgs {
    complex: String,
    #[arg(long, value_enum)]
    walk: WalkKind,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    l: Option<isize>,
    #[arg(long)]
    l1: Option<usize>,
    #[arg(long)]
    l2: Option<usize>,
    #[arg(long)]
    j: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    i_colors: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    j_colors: Vec<usize>,
    /// write the operator as CSV triplets (row_face, col_face, prob)
    #[arg(long)]
    export_operator: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    Complement,
    Colored,
    Trickling,
    FixedUnion,
    Containment,
}

#[derive(clap::Args, Debug)]
struct VerifyArgs {
    complex: String,
    /// run every verifier that applies to the complex
    #[arg(long)]
    all: bool,
    #[arg(long, value_enum)]
    check: Vec<CheckKind>,
    #[arg(long, default_value_t = 0)]
    l1: usize,
    #[arg(long, default_value_t = 0)]
    l2: usize,
    #[arg(long, default_value_t = 0)]
    l: usize,
    #[arg(long, default_value_t = 1)]
    j: usize,
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long, value_delimiter = ',')]
    i_colors: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    j_colors: Vec<usize>,
}

#[derive(clap::Args, Debug)]
struct MixingArgs {
    complex: String,
    /// a set "J:f1;f2;..." of J-faces, each face "v1,v2,..."
    #[arg(long)]
    set: Vec<String>,
    /// draw disjoint random sets of these dimensions instead
    #[arg(long, value_delimiter = ',')]
    random: Vec<usize>,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GrassmannWalk {
    Containment,
    Complement,
}

#[derive(clap::Args, Debug)]
struct GrassmannArgs {
    #[arg(long)]
    q: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, value_enum, default_value = "linear")]
    flavor: FlavorArg,
    #[arg(long, value_enum)]
    walk: Option<GrassmannWalk>,
    /// containment walk from level k to level l
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    l: usize,
    #[arg(long, default_value_t = 0)]
    l1: usize,
    #[arg(long, default_value_t = 0)]
    l2: usize,
    /// condition the complement walk on the span of the first cond-dim unit vectors
    #[arg(long)]
    cond_dim: Option<usize>,
}

#[derive(clap::Args, Debug)]
struct StavCheckArgs {
    #[command(flatten)]
    stav: StavArgs,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// seed of the sampler spot checks
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    skip_goodness: bool,
    /// write the STAV tables as JSON
    #[arg(long)]
    emit: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TestKind {
    Stav,
    Dl,
    Up2k,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CompareArg {
    SampledT,
    Full,
}

#[derive(clap::Args, Debug)]
struct AgreeRunArgs {
    #[command(flatten)]
    stav: StavArgs,
    #[command(flatten)]
    ensemble: EnsembleArgs,
    /// stav uses the instance's STS; dl and up2k build the test from --complex, --d/--k and --l
    #[arg(long, value_enum, default_value = "stav")]
    test: TestKind,
    /// t level of the up2k test
    #[arg(long)]
    t_level: Option<usize>,
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Monte Carlo seed (required with --mode mc)
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "sampled-t")]
    compare: CompareArg,
}

#[derive(clap::Args, Debug)]
struct DecodeArgs {
    #[command(flatten)]
    stav: StavArgs,
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 1.0 / 40.0)]
    tau_global: f64,
    #[arg(long, default_value_t = 1.0 / 20.0)]
    tau_local: f64,
    /// refuse to decode unless the instance is (gamma, r)-good
    #[arg(long)]
    check_goodness: bool,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// decode a partite k,l ensemble through two I,J-STAVs (uses --complex, --k, --l)
    #[arg(long)]
    partite: bool,
    /// seed of the partite color-tuple search
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_face(s: &str) -> Result<Face, CliError> {
    let verts: Vec<u32> = s
        .split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse().map_err(|_| CliError::Usage(format!("bad vertex {x:?}"))))
        .collect::<Result<_, _>>()?;
    Ok(Face::new(verts)?)
}

fn face_label(f: &Face) -> String {
    f.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn require<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

fn operator_summary(op: &MarkovOperator) -> Result<Value, CliError> {
    if op.square {
        let s = square_spectrum(op)?;
        Ok(json!({"rows": op.n_source(), "cols": op.n_target(), "square": true, "lambda": s.two_sided(), "spectrum": s}))
    } else {
        let s = bipartite_norm(op)?;
        Ok(json!({"rows": op.n_source(), "cols": op.n_target(), "square": false, "lambda": s.lambda_bip, "spectrum": s}))
    }
}

fn build(a: &BuildArgs, m: &mut RunManifest) -> Result<Value, CliError> {
    let sources = [a.complete.is_some(), !a.partite.is_empty(), a.matroid.is_some(), a.from.is_some()];
    if sources.iter().filter(|&&x| x).count() != 1 {
        return Err(CliError::Usage("give exactly one of --complete, --partite, --matroid, --from".into()));
    }
    let mut c = if let Some(nd) = &a.complete {
        Complex::complete(nd[0], nd[1])?
    } else if !a.partite.is_empty() {
        Complex::partite_complete(&a.partite)?
    } else if let Some(edges) = &a.matroid {
        let parsed: Vec<(usize, usize)> = edges
            .split(',')
            .map(|e| {
                let (x, y) = e.split_once('-').ok_or_else(|| CliError::Usage(format!("bad edge {e:?}")))?;
                let p = |s: &str| s.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("bad edge {e:?}")));
                Ok((p(x)?, p(y)?))
            })
            .collect::<Result<_, CliError>>()?;
        Complex::graphic_matroid(&parsed, require(a.truncation, "truncation")?)?
    } else {
        load_complex(a.from.as_deref().unwrap(), m)?
    };
    if let Some(face) = &a.link {
        c = c.link(&parse_face(face)?)?;
    }
    if let Some(k) = a.skeleton {
        c = c.skeleton(k)?;
    }
    let text = complex_to_json(&c);
    std::fs::write(&a.out, &text).map_err(|e| CliError::Io(format!("{}: {e}", a.out)))?;
    let sizes: Vec<usize> = (0..=c.dim()).map(|k| c.level_size(k)).collect();
    Ok(json!({
        "out": a.out,
        "sha256": report::sha256_hex(text.as_bytes()),
        "n_vertices": c.n_vertices(),
        "d": c.d(),
        "partite": c.coloring().is_some(),
        "level_sizes": sizes,
    }))
}

fn spectrum(a: &SpectrumArgs, m: &mut RunManifest) -> Result<Value, CliError> {
    let c = load_complex(&a.complex, m)?;
    let level_faces = |k: isize| c.level(k).faces.clone();
    let (op, rows, cols) = match a.walk {
        WalkKind::Up => {
            let k = require(a.k, "k")?;
            (walks::up_operator(&c, k)?, level_faces(k as isize), level_faces(k as isize + 1))
        }
        WalkKind::Down => {
            let k = require(a.k, "k")?;
            (walks::down_operator(&c, k)?, level_faces(k as isize + 1), level_faces(k as isize))
        }
        WalkKind::Containment => {
            let (k, l) = (require(a.k, "k")?, require(a.l, "l")?);
            (walks::containment_operator(&c, k, l)?, level_faces(k as isize), level_faces(l))
        }
        WalkKind::Lower => {
            let (k, l) = (require(a.k, "k")?, require(a.l, "l")?);
            (walks::lower_walk(&c, k, l)?, level_faces(k as isize), level_faces(k as isize))
        }
        WalkKind::NonLazyUpper => {
            let k = require(a.k, "k")?;
            (walks::non_lazy_upper_walk(&c, k)?, level_faces(k as isize), level_faces(k as isize))
        }
        WalkKind::Complement => {
            let (l1, l2) = (require(a.l1, "l1")?, require(a.l2, "l2")?);
            (walks::complement_walk(&c, l1, l2)?, level_faces(l1 as isize), level_faces(l2 as isize))
        }
        WalkKind::Colored => walks::colored_walk(&c, &a.i_colors, &a.j_colors)?,
        WalkKind::FixedUnion => {
            let l = require(a.l, "l")?;
            let l = usize::try_from(l).map_err(|_| CliError::Usage("--l must be nonnegative".into()))?;
            (walks::fixed_union_walk(&c, l, require(a.j, "j")?)?, level_faces(l as isize), level_faces(l as isize))
        }
    };
    if let Some(path) = &a.export_operator {
        let rl: Vec<String> = rows.iter().map(face_label).collect();
        let cl: Vec<String> = cols.iter().map(face_label).collect();
        std::fs::write(path, op.to_csv(&rl, &cl)).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    }
    let mut v = operator_summary(&op)?;
    v["walk"] = json!(format!("{:?}", a.walk));
    v["row_sum_residual"] = json!(op.row_sum_residual());
    Ok(v)
}

fn row(check: &str, params: Value, r: Result<(f64, f64, bool), Error>) -> Result<Value, CliError> {
    match r {
        Ok((lhs, rhs, pass)) => Ok(json!({"check": check, "params": params, "lhs": lhs, "rhs": rhs, "pass": pass})),
        Err(e @ (Error::NotApplicable(_) | Error::NotPartite)) => {
            Ok(json!({"check": check, "params": params, "lhs": null, "rhs": null, "pass": null, "note": e.to_string()}))
        }
        Err(e) => Err(e.into()),
    }
}

fn verify(a: &VerifyArgs, m: &mut RunManifest) -> Result<Value, CliError> {
    let c = load_complex(&a.complex, m)?;
    let dim = c.dim();
    let mut rows = Vec::new();
    let complement = |l1: usize, l2: usize| spectra::verify_complement_bound(&c, l1, l2).map(|b| (b.lhs, b.rhs, b.pass));
    let colored = |i: &[usize], j: &[usize]| spectra::verify_colored_bound(&c, i, j).map(|b| (b.lhs, b.rhs, b.pass));
    let trickling = || spectra::verify_trickling(&c).map(|b| (b.lhs, b.rhs, b.pass));
    let fixed = |l: usize, j: usize| spectra::verify_fixed_union_bound(&c, l, j).map(|b| (b.lhs, b.rhs, b.pass));
    let containment = |k: usize| {
        spectra::verify_containment_bound(&c, k).map(|b| (b.lhs, b.sqrt_term + 10.0 * k as f64 * b.link_lambda, !b.gross_violation))
    };
    if a.all {
        for l1 in 0..=2usize {
            for l2 in l1..=2usize {
                if (l1 + l2 + 1) as isize <= dim {
                    rows.push(row("complement", json!({"l1": l1, "l2": l2}), complement(l1, l2))?);
                }
            }
        }
        for l in 0..=2usize {
            for j in 1..=l + 1 {
                if (l + j + 1) as isize <= dim {
                    rows.push(row("fixed_union", json!({"l": l, "j": j}), fixed(l, j))?);
                }
            }
        }
        for k in 0..dim.max(0) as usize {
            rows.push(row("containment", json!({"k": k}), containment(k))?);
        }
        if c.coloring().is_some() {
            let colors = dim as usize + 1;
            'pairs: for i in 0..colors {
                for j in i + 1..colors {
                    if rows.len() >= 64 {
                        break 'pairs;
                    }
                    rows.push(row("colored", json!({"i": [i], "j": [j]}), colored(&[i], &[j]))?);
                }
            }
            if dim == 2 {
                rows.push(row("trickling", json!({}), trickling())?);
            }
        }
    }
    for kind in &a.check {
        rows.push(match kind {
            CheckKind::Complement => row("complement", json!({"l1": a.l1, "l2": a.l2}), complement(a.l1, a.l2))?,
            CheckKind::Colored => row("colored", json!({"i": a.i_colors, "j": a.j_colors}), colored(&a.i_colors, &a.j_colors))?,
            CheckKind::Trickling => row("trickling", json!({}), trickling())?,
            CheckKind::FixedUnion => row("fixed_union", json!({"l": a.l, "j": a.j}), fixed(a.l, a.j))?,
            CheckKind::Containment => row("containment", json!({"k": a.k}), containment(a.k))?,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Usage("give --all or at least one --check".into()));
    }
    let one = link_expansion(&c, false).ok();
    let two = link_expansion(&c, true).ok();
    let failed = rows.iter().filter(|r| r["pass"] == json!(false)).count();
    Ok(json!({
        "link_expansion_one_sided": one,
        "link_expansion_two_sided": two,
        "rows": rows,
        "failed": failed,
    }))
}

fn mixing(a: &MixingArgs, m: &mut RunManifest) -> Result<Value, CliError> {
    let c = load_complex(&a.complex, m)?;
    let mut sets: Vec<(usize, Vec<Face>)> = Vec::new();
    for s in &a.set {
        let (j, faces) = s.split_once(':').ok_or_else(|| CliError::Usage(format!("bad set {s:?}, expected J:faces")))?;
        let j: usize = j.trim().parse().map_err(|_| CliError::Usage(format!("bad dimension in {s:?}")))?;
        let faces = faces.split(';').filter(|f| !f.trim().is_empty()).map(parse_face).collect::<Result<Vec<_>, _>>()?;
        sets.push((j, faces));
    }
    if !a.random.is_empty() {
        if !sets.is_empty() {
            return Err(CliError::Usage("--set and --random are exclusive".into()));
        }
        let seed = require(a.seed, "seed")?;
        m.seed = Some(seed);
        let mut rng = StdRng::seed_from_u64(seed);
        let mut verts: Vec<u32> = (0..c.n_vertices() as u32).collect();
        verts.shuffle(&mut rng);
        let groups = a.random.len();
        let chunk = verts.len() / groups;
        for (g, &j) in a.random.iter().enumerate() {
            let mut own = verts[g * chunk..(g + 1) * chunk].to_vec();
            own.sort_unstable();
            let faces: Vec<Face> = c
                .level(j as isize)
                .faces
                .iter()
                .filter(|f| f.iter().all(|v| own.binary_search(v).is_ok()))
                .filter(|_| rng.gen_bool(a.density.clamp(0.0, 1.0)))
                .cloned()
                .collect();
            sets.push((j, faces));
        }
    }
    if sets.is_empty() {
        return Err(CliError::Usage("give --set or --random".into()));
    }
    let r = mixing_check(&c, &sets)?;
    let described: Vec<Value> = sets.iter().map(|(j, f)| json!({"j": j, "faces": f.len()})).collect();
    Ok(json!({"sets": described, "report": r}))
}

fn grassmann(a: &GrassmannArgs) -> Result<Value, CliError> {
    let p = GrassmannPoset::new(a.q, a.n, a.d, a.flavor.into())?;
    let mut levels = Vec::new();
    for k in 0..=a.d {
        levels.push(json!({"k": k, "size": p.level(k)?.len(), "expected": p.expected_level_size(k)}));
    }
    let walk = match a.walk {
        None => Value::Null,
        Some(GrassmannWalk::Containment) => {
            let op = containment_walk(&p, a.k, a.l)?;
            let lam = bipartite_norm(&op)?.lambda_bip;
            let bound = containment_bound(a.q, a.k);
            json!({"walk": "containment", "k": a.k, "l": a.l, "lambda": lam, "bound": bound, "pass": lam <= bound + 1e-9})
        }
        Some(GrassmannWalk::Complement) => {
            let u0 = match a.cond_dim {
                None | Some(0) => None,
                Some(cd) => {
                    let rows: Vec<Vec<u8>> = (0..cd)
                        .map(|i| (0..a.n).map(|j| u8::from(i == j)).collect())
                        .collect();
                    Some(match a.flavor {
                        FlavorArg::Linear => Subspace::linear(p.field(), a.n, rows)?,
                        FlavorArg::Affine => Subspace::affine(p.field(), a.n, rows, vec![0; a.n])?,
                    })
                }
            };
            let w = conditioned_complement_walk(&p, a.l1, a.l2, u0.as_ref())?;
            let lam = bipartite_norm(&w.op)?.lambda_bip;
            let bound = complement_bound(a.flavor.into(), a.q, a.n, a.l1, a.l2, w.l3);
            json!({
                "walk": "complement", "l1": a.l1, "l2": a.l2, "l3": w.l3,
                "left": w.left.len(), "right": w.right.len(),
                "lambda": lam, "bound": bound, "pass": lam <= bound + 1e-9,
            })
        }
    };
    Ok(json!({"q": a.q, "n": a.n, "d": a.d, "flavor": format!("{:?}", a.flavor), "levels": levels, "walk": walk}))
}

fn stav_check(a: &StavCheckArgs, m: &mut RunManifest) -> Result<Value, CliError> {
    m.seed = Some(a.seed);
    let mut cfg = GoodnessConfig::new(a.gamma, a.r);
    cfg.seed = a.seed;
    if a.stav.stav == StavKind::Hdx && a.emit.is_none() {
        let c = a.stav.complex(m)?;
        let l = require(a.stav.l, "l")?;
        let h = HdxStav::new(&c, a.stav.d.unwrap_or(c.d()), l)?;
        let inv = h.check_invariants()?;
        let good = if a.skip_goodness { None } else { Some(h.goodness_check(cfg)?) };
        return Ok(json!({
            "kind": "hdx",
            "invariants": inv,
            "invariants_hold": inv.holds(),
            "first_failure": inv.first_failure(),
            "goodness": good,
            "good": good.map(|g| g.pass()),
        }));
    }
    let x = a.stav.build(m)?;
    if let Some(path) = &a.emit {
        std::fs::write(path, hdx_core::io::stav_to_json(&x)).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    }
    let inv = x.check_invariants();
    let good = if a.skip_goodness { None } else { Some(goodness_check(&x, cfg)?) };
    Ok(json!({
        "kind": format!("{:?}", x.kind),
        "sizes": {"points": x.n_points, "s": x.s_sets.len(), "t": x.t_sets.len(), "a": x.a_sets.len(),
                  "d_stav": x.d_stav.len(), "sts": x.sts.len(), "vasa": x.vasa.as_ref().map(|v| v.len())},
        "invariants": inv,
        "invariants_hold": inv.holds(),
        "first_failure": inv.first_failure(),
        "goodness": good,
        "good": good.map(|g| g.pass()),
    }))
}

fn eval_mode(mode: ModeArg, samples: usize, seed: Option<u64>, m: &mut RunManifest) -> Result<EvalMode, CliError> {
    match mode {
        ModeArg::Exact => Ok(EvalMode::Exact),
        ModeArg::Mc => {
            let seed = seed.ok_or_else(|| CliError::Usage("--seed is required with --mode mc".into()))?;
            m.seed = Some(seed);
            Ok(EvalMode::MonteCarlo { samples, seed })
        }
    }
}

fn agree_run(a: &AgreeRunArgs, m: &mut RunManifest) -> Result<Value, CliError> {
    let mode = eval_mode(a.mode, a.samples, a.seed, m)?;
    let compare = match a.compare {
        CompareArg::SampledT => Compare::SampledT,
        CompareArg::Full => Compare::FullIntersection,
    };
    let (sts, x, n_points) = match a.test {
        TestKind::Stav => {
            let x = a.stav.build(m)?;
            let n = x.n_points;
            (x.sts_distribution(), Some(x), n)
        }
        TestKind::Dl => {
            let c = a.stav.complex(m)?;
            (dl_distribution(&c, a.stav.d.unwrap_or(c.d()), require(a.stav.l, "l")?)?, None, c.n_vertices())
        }
        TestKind::Up2k => {
            let c = a.stav.complex(m)?;
            (up2k_distribution(&c, require(a.stav.k, "k")?, a.t_level)?, None, c.n_vertices())
        }
    };
    let loaded = a.ensemble.load(&sts.s_sets, n_points, m)?;
    let f = &loaded.ensemble;
    let r = rejection(&sts, f, mode, compare)?;
    let xi = match &x {
        Some(x) => Some(surprise(x, f)?),
        None => None,
    };
    let plant_distance = match &loaded.plant {
        Some(g) => Some(dist_gamma(f, g, 0.0, &s_marginal(&sts))?),
        None => None,
    };
    Ok(json!({
        "test": format!("{:?}", a.test),
        "compare": format!("{:?}", compare),
        "sets": sts.s_sets.len(),
        "sts_entries": sts.entries.len(),
        "ensemble": a.ensemble.describe(),
        "rejection": r,
        "surprise": xi,
        "plant_distance": plant_distance,
    }))
}

fn decode(a: &DecodeArgs, m: &mut RunManifest) -> Result<Value, CliError> {
    let cfg = DecoderConfig { tau_global: a.tau_global, tau_local: a.tau_local };
    cfg.validate()?;
    if a.partite {
        let c = a.stav.complex(m)?;
        let (k, l) = (require(a.stav.k, "k")?, require(a.stav.l, "l")?);
        m.seed = Some(a.seed);
        let sets: Vec<Vec<u32>> = c.level(k as isize).faces.iter().map(|f| f.to_vec()).collect();
        let loaded = a.ensemble.load(&sets, c.n_vertices(), m)?;
        let pcfg = PartiteConfig { decoder: cfg, seed: a.seed, ..PartiteConfig::default() };
        let out = partite_decode(&c, k, l, &loaded.ensemble, &pcfg)?;
        let recovered = loaded.plant.as_ref().map(|g| out.output.assignment(u32::MAX) == *g);
        return Ok(json!({"ensemble": a.ensemble.describe(), "partite": out, "recovered_plant": recovered}));
    }
    let x = a.stav.build(m)?;
    let loaded = a.ensemble.load(&x.s_sets, x.n_points, m)?;
    let out = if a.check_goodness {
        global_decode_checked(&x, &loaded.ensemble, &cfg, GoodnessConfig::new(a.gamma, a.r))?
    } else {
        global_decode(&x, &loaded.ensemble, &cfg)?
    };
    let g = out.assignment(0);
    let distance = dist_gamma(&loaded.ensemble, &g, 0.0, &s_marginal(&x.sts_distribution()))?;
    let recovered = loaded.plant.as_ref().map(|p| out.assignment(u32::MAX) == *p);
    Ok(json!({
        "ensemble": a.ensemble.describe(),
        "config": cfg,
        "global": g,
        "distance": distance,
        "recovered_plant": recovered,
        "output": out,
    }))
}

fn size_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("HDX_SIZE_CAP") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| CliError::Usage(format!("HDX_SIZE_CAP must be an integer, got {v:?}")))?;
            caps::set_table_cap(n);
            caps::set_level_cap(n);
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn run(cli: &Cli, args: Vec<String>) -> Result<String, CliError> {
    let start = Instant::now();
    let cap = size_cap()?;
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(CliError::Usage("--threads must be positive".into()));
    }
    let name = match &cli.command {
        Command::Build(_) => "build",
        Command::Spectrum(_) => "spectrum",
        Command::Verify(_) => "verify",
        Command::Mixing(_) => "mixing",
        Command::Grassmann(_) => "grassmann",
        Command::StavCheck(_) => "stav-check",
        Command::AgreeRun(_) => "agree-run",
        Command::Decode(_) => "decode",
    };
    let mut m = RunManifest::new(name, args, threads, cap);
    let result = match &cli.command {
        Command::Build(a) => build(a, &mut m)?,
        Command::Spectrum(a) => spectrum(a, &mut m)?,
        Command::Verify(a) => verify(a, &mut m)?,
        Command::Mixing(a) => mixing(a, &mut m)?,
        Command::Grassmann(a) => grassmann(a)?,
        Command::StavCheck(a) => stav_check(a, &mut m)?,
        Command::AgreeRun(a) => agree_run(a, &mut m)?,
        Command::Decode(a) => decode(a, &mut m)?,
    };
    if cli.timing {
        m.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok(render(&m, &result, cli.format))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&cli, args) {
        Ok(text) => {
            let written = match &cli.report {
                Some(path) => std::fs::write(path, &text).map_err(|e| format!("{path}: {e}")),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("io error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            eprintln!("hdx: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
