//! The `veerkit` command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::certify::{self, Budget, Certificate, CertifyError};
use crate::cusp::CuspCrossSection;
use crate::flatsurf::{self, FlatError, FlatSurfaceJson};
use crate::geometry::{self, Classification, GeometryError};
use crate::homology::{self, FaceData, HomologyError};
use crate::triangulation::{isomorphism_signature, IdealTriangulation, TriangulationJson};
use crate::veering::{self, VeeringJson, VeeringStructure};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NONGEOMETRIC: i32 = 3;
pub const EXIT_FLAT: i32 = 4;
pub const EXIT_NO_CONVERGENCE: i32 = 5;
pub const EXIT_BUDGET: i32 = 6;
pub const EXIT_NOT_NONGEOMETRIC: i32 = 7;
pub const EXIT_PARITY: i32 = 8;

#[derive(Parser, Debug)]
#[command(name = "veerkit", version, about = "Veering triangulations, gluing equations and certified (non-)geometricity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a veering triangulation from a torus word or a flat surface.
    Build(BuildArgs),
    /// Solve the gluing equations and classify the solution.
    Solve(SolveArgs),
    /// Produce a geometricity or non-geometricity certificate.
    Certify(CertifyArgs),
    /// Re-check a certificate.
    Check(CheckArgs),
    /// Homology, fiber boundary slopes and degeneracy slopes.
    Homology(HomologyArgs),
    /// Genus and punctures of a class in a fibered face.
    Fiber(FiberArgs),
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false, id = "source")]
pub struct Source {
    /// Once-punctured torus monodromy word over {L, R}.
    #[arg(long)]
    pub ptorus: Option<String>,
    /// Flat surface JSON file.
    #[arg(long)]
    pub flatsurf: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Triangulation JSON files.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Margin for flat shapes: |Im z| <= tol.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Worker threads over input files.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Geometric,
    Nongeometric,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Geometric)]
    pub mode: Mode,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random-walk restarts for the non-geometric search.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Longest Pachner path tried.
    #[arg(long)]
    pub max_path: Option<usize>,
    /// Certificate file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    pub cert: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HomologyArgs {
    pub file: PathBuf,
}

#[derive(Args, Debug)]
pub struct FiberArgs {
    /// Face data JSON file.
    #[arg(long)]
    pub face: PathBuf,
    /// Named coefficients, e.g. `n=1,g=2`.
    #[arg(long)]
    pub coeffs: String,
}

/// Machine-readable summary of one command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    /// `(path, sha256)` of every input.
    pub inputs: Vec<(String, String)>,
    pub verdicts: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<String>,
}

impl RunReport {
    fn new(command: &str) -> Self {
        RunReport {
            command: command.into(),
            inputs: Vec::new(),
            verdicts: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
            residuals: BTreeMap::new(),
            certificate: None,
        }
    }

    fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push((path.display().to_string(), hex::encode(Sha256::digest(bytes))));
    }

    fn write(&self, path: &Option<PathBuf>) -> Result<(), Failure> {
        if let Some(p) = path {
            let json = serde_json::to_string_pretty(self).expect("report serializes");
            std::fs::write(p, json).map_err(|e| Failure::input(format!("cannot write {}: {e}", p.display())))?;
        }
        Ok(())
    }
}

/// A diagnostic with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INPUT, message: message.into() }
    }
}

fn seed_or_env(seed: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var("VEERKIT_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| Failure::input(format!("VEERKIT_SEED is not an integer: {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn print_out(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

/// Triangulation and embedded veering structure from JSON.
pub fn parse_triangulation(bytes: &[u8]) -> Result<(IdealTriangulation, Option<VeeringStructure>), Failure> {
    let json: TriangulationJson =
        serde_json::from_slice(bytes).map_err(|e| Failure::input(format!("invalid triangulation file: {e}")))?;
    let tri = json.to_triangulation().map_err(|e| Failure::input(e.to_string()))?;
    Ok((tri, json.veering.map(VeeringStructure::from)))
}

pub fn triangulation_json(tri: &IdealTriangulation, v: Option<&VeeringStructure>) -> String {
    let mut json = TriangulationJson::from_triangulation(tri);
    json.veering = v.map(VeeringJson::from);
    serde_json::to_string_pretty(&json).expect("triangulation serializes")
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print_out(text);
            Ok(())
        }
    }
}

fn build(args: &BuildArgs) -> Result<i32, Failure> {
    let flat_err = |e: FlatError| Failure::input(e.to_string());
    let (tri, v) = if let Some(word) = &args.source.ptorus {
        flatsurf::ptorus_bundle(word).map_err(flat_err)?
    } else {
        let path = args.source.flatsurf.as_ref().expect("clap enforces one source");
        let text = String::from_utf8_lossy(&read(path)?).into_owned();
        let (surf, pa) = FlatSurfaceJson::parse(&text).and_then(|j| j.build()).map_err(flat_err)?;
        let out = flatsurf::gueritaud_triangulation(&surf, &pa).map_err(flat_err)?;
        (out.triangulation, out.veering)
    };
    eprintln!("built {} tetrahedra, signature {}", tri.tet_count(), isomorphism_signature(&tri));
    emit(&args.out, &triangulation_json(&tri, Some(&v)))?;
    Ok(EXIT_OK)
}

#[derive(Clone, Debug, Serialize)]
struct SolveOutput {
    file: String,
    shapes: Vec<[f64; 2]>,
    classification: Classification,
    volume: Option<f64>,
    residual: f64,
}

fn solve_one(bytes: &[u8], path: &Path, tol: f64, seed: u64) -> Result<(SolveOutput, i32), Failure> {
    let (tri, _) = parse_triangulation(bytes)?;
    let system = geometry::assemble_for(&tri).map_err(|e| Failure::input(e.to_string()))?;
    let sol = match geometry::solve(&system, None, seed) {
        Ok(s) => s,
        Err(GeometryError::Cusp(e)) => return Err(Failure::input(e.to_string())),
        Err(e) => return Err(Failure { code: EXIT_NO_CONVERGENCE, message: format!("{}: {e}", path.display()) }),
    };
    let classification = geometry::classify(&sol.shapes, tol);
    let code = match classification {
        Classification::Geometric => EXIT_OK,
        Classification::NonGeometric(_) => EXIT_NONGEOMETRIC,
        Classification::ContainsFlat(_) => EXIT_FLAT,
    };
    let out = SolveOutput {
        file: path.display().to_string(),
        shapes: sol.shapes.iter().map(|z| [z.re, z.im]).collect(),
        volume: geometry::volume(&sol.shapes).ok(),
        residual: geometry::max_residual(&system, &sol.shapes),
        classification,
    };
    Ok((out, code))
}

fn solve(args: &SolveArgs) -> Result<i32, Failure> {
    let seed = seed_or_env(args.seed)?;
    let mut report = RunReport::new("solve");
    let inputs: Vec<Vec<u8>> = args.files.iter().map(|p| read(p)).collect::<Result<_, _>>()?;
    for (p, b) in args.files.iter().zip(&inputs) {
        report.input(p, b);
    }
    let jobs = args.jobs.max(1);
    let mut results: Vec<Option<(Result<(SolveOutput, i32), Failure>, f64)>> = (0..inputs.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        for (chunk_idx, chunk) in results.chunks_mut(inputs.len().div_ceil(jobs).max(1)).enumerate() {
            let start = chunk_idx * inputs.len().div_ceil(jobs).max(1);
            let (inputs, files) = (&inputs, &args.files);
            s.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    let t = Instant::now();
                    let r = solve_one(&inputs[start + k], &files[start + k], args.tol, seed);
                    *slot = Some((r, t.elapsed().as_secs_f64() * 1e3));
                }
            });
        }
    });
    let mut code = EXIT_OK;
    for (path, r) in args.files.iter().zip(results) {
        let (r, ms) = r.expect("every input is processed");
        let key = path.display().to_string();
        report.timings_ms.insert(key.clone(), ms);
        match r {
            Ok((out, c)) => {
                eprintln!("{key}: {:?}, volume {:?}", out.classification, out.volume);
                report.verdicts.insert(key.clone(), format!("{:?}", out.classification));
                report.residuals.insert(key, out.residual);
                print_out(&serde_json::to_string_pretty(&out).expect("output serializes"));
                if code == EXIT_OK {
                    code = c;
                }
            }
            Err(f) => {
                eprintln!("{}", f.message);
                report.verdicts.insert(key, f.message.clone());
                if code == EXIT_OK {
                    code = f.code;
                }
            }
        }
    }
    report.write(&args.report)?;
    Ok(code)
}

fn certify_cmd(args: &CertifyArgs) -> Result<i32, Failure> {
    let seed = seed_or_env(args.seed)?;
    let bytes = read(&args.file)?;
    let (tri, _) = parse_triangulation(&bytes)?;
    let mut report = RunReport::new("certify");
    report.input(&args.file, &bytes);
    let t = Instant::now();
    let result = match args.mode {
        Mode::Geometric => certify::certify_geometric(&tri, seed),
        Mode::Nongeometric => {
            let mut budget = Budget::default();
            if let Some(b) = args.budget {
                budget.restarts = b;
            }
            if let Some(l) = args.max_path {
                budget.max_path_length = l;
            }
            certify::certify_nongeometric(&tri, None, budget, seed)
        }
    };
    report.timings_ms.insert("certify".into(), t.elapsed().as_secs_f64() * 1e3);
    let code = match result {
        Ok(cert) => {
            report.verdicts.insert("verdict".into(), format!("{:?}", cert.verdict));
            report.certificate = Some(args.out.as_ref().map_or("-".into(), |p| p.display().to_string()));
            eprintln!("{:?}, {} step(s), digest {}", cert.verdict, cert.steps.len(), cert.digest);
            emit(&args.out, &cert.to_json())?;
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{e}");
            report.verdicts.insert("verdict".into(), e.to_string());
            match e {
                CertifyError::BudgetExhausted => EXIT_BUDGET,
                CertifyError::NotNonGeometric => EXIT_NOT_NONGEOMETRIC,
                CertifyError::Triangulation(_) => EXIT_INPUT,
                _ => EXIT_FAIL,
            }
        }
    };
    report.write(&args.report)?;
    Ok(code)
}

fn check(args: &CheckArgs) -> Result<i32, Failure> {
    let bytes = read(&args.cert)?;
    let text = String::from_utf8_lossy(&bytes);
    let cert = Certificate::from_json(&text).map_err(|e| Failure::input(format!("invalid certificate: {e}")))?;
    let mut report = RunReport::new("check");
    report.input(&args.cert, &bytes);
    let t = Instant::now();
    let r = certify::check_certificate(&cert);
    report.timings_ms.insert("check".into(), t.elapsed().as_secs_f64() * 1e3);
    report.verdicts.insert("ok".into(), r.ok.to_string());
    print_out(&serde_json::to_string_pretty(&r).expect("report serializes"));
    for f in &r.failures {
        eprintln!("FAIL: {f}");
    }
    report.write(&args.report)?;
    Ok(if r.ok { EXIT_OK } else { EXIT_FAIL })
}

#[derive(Clone, Debug, Serialize)]
struct CuspReport {
    fiber_slope: Option<(i64, (i64, i64))>,
    degeneracy_slope: Option<(i64, i64)>,
    prongs: Option<i64>,
}

fn homology_cmd(args: &HomologyArgs) -> Result<i32, Failure> {
    let (tri, v) = parse_triangulation(&read(&args.file)?)?;
    let h = homology::homology_groups(&tri).map_err(|e| Failure::input(e.to_string()))?;
    let v = v.filter(|v| veering::is_veering(&tri, v)).or_else(|| veering::find_veering_structure(&tri));
    let fiber = homology::fiber_boundary_slopes(&tri).ok();
    let cusps: Vec<CuspReport> = (0..tri.vertex_count())
        .map(|c| {
            let section = CuspCrossSection::new(&tri, c).ok();
            let fiber_slope = fiber.as_ref().map(|f| f[c]);
            let (degeneracy_slope, prongs) = match (&v, &section) {
                (Some(v), Some(s)) => {
                    let d = veering::degeneracy_slope(&tri, v, s).ok();
                    let p = fiber_slope.and_then(|f| veering::prong_count(&tri, v, s, f.1).ok());
                    (d, p)
                }
                _ => (None, None),
            };
            CuspReport { fiber_slope, degeneracy_slope, prongs }
        })
        .collect();
    let out = serde_json::json!({
        "h1": h.h1.to_string(),
        "h1_rank": h.h1.rank,
        "h1_torsion": h.h1.torsion,
        "h2_relative_rank": h.h2_relative.rank,
        "veering": v.is_some(),
        "cusps": cusps,
    });
    print_out(&serde_json::to_string_pretty(&out).expect("output serializes"));
    Ok(EXIT_OK)
}

/// `n=1,g=2` as a map.
pub fn parse_coeffs(s: &str) -> Result<BTreeMap<String, i64>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected name=value, got {part:?}"))?;
        let v: i64 = v.trim().parse().map_err(|_| format!("not an integer: {v:?}"))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn fiber(args: &FiberArgs) -> Result<i32, Failure> {
    let face: FaceData =
        serde_json::from_slice(&read(&args.face)?).map_err(|e| Failure::input(format!("invalid face file: {e}")))?;
    let values = parse_coeffs(&args.coeffs).map_err(Failure::input)?;
    let (a, b) = face.coefficients_from(&values).map_err(|e| Failure::input(e.to_string()))?;
    match homology::fiber_type(&face, a, b) {
        Ok(ft) => {
            eprintln!("Σ_{{{},{}}}, norm {}", ft.genus, ft.punctures, ft.norm);
            let out = serde_json::json!({
                "coefficients": [a, b],
                "genus": ft.genus,
                "punctures": ft.punctures,
                "norm": ft.norm,
                "surface": format!("Sigma_{},{}", ft.genus, ft.punctures),
                "boundary": ft.boundary,
            });
            print_out(&serde_json::to_string_pretty(&out).expect("output serializes"));
            Ok(EXIT_OK)
        }
        Err(e @ HomologyError::ParityViolation { .. }) => Err(Failure { code: EXIT_PARITY, message: e.to_string() }),
        Err(e) => Err(Failure::input(e.to_string())),
    }
}

pub fn run(cli: &Cli) -> i32 {
    let r = match &cli.command {
        Command::Build(a) => build(a),
        Command::Solve(a) => solve(a),
        Command::Certify(a) => certify_cmd(a),
        Command::Check(a) => check(a),
        Command::Homology(a) => homology_cmd(a),
        Command::Fiber(a) => fiber(a),
    };
    match r {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn main() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
