//! Command-line front end. Every command returns its report as a string so
//! the binary and the tests share one code path; reports start with a
//! versioned header and never depend on hash order or the clock.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::certificate::{verify_certificate, Certificate};
use crate::error::{Error, Result};
use crate::generate::{random_space, seeded};
use crate::isometry::{enumerate_isometries, Isometry};
use crate::metric::{validate_metric, FiniteMetricSpace, Subset};
use crate::rational::Rational;
use crate::tower::{finite_injectivity_audit, Tower, TowerConfig};
use crate::witness::{
    rigidity_probe, run_pipeline, PipelineConfig, ProbeVerdict, Witness, WitnessSet,
};

pub const REPORT_HEADER: &str = "urysohn report 1";

#[derive(Debug, Parser)]
#[command(
    name = "urysohn",
    version,
    about = "Katětov towers and isometry-group certificates over exact rationals"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the metric axioms of an FMS file.
    Validate { input: PathBuf },
    /// Print the isometry group with its orbit partition.
    IsoGroup { input: PathBuf },
    #[command(subcommand)]
    Tower(TowerCommand),
    #[command(subcommand)]
    Witness(WitnessCommand),
    /// Look for points realizing every grid-valued Katětov map on small subsets.
    Audit {
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        max_subset: usize,
        #[arg(long, value_parser = parse_grid, default_value = "1")]
        grid: Grid,
        /// Only audit subsets of the first N points.
        #[arg(long)]
        domain: Option<usize>,
    },
    /// Check whether an isometry of the top tower level preserves level `n`.
    RigidityProbe {
        #[arg(long)]
        tower: PathBuf,
        #[arg(long)]
        provenance: PathBuf,
        /// Certificate whose witness table applies to this tower.
        #[arg(long)]
        cert: PathBuf,
        /// Isometry line such as `iso 0->1 1->0 2->2`.
        #[arg(long)]
        iso: String,
        #[arg(long)]
        level: usize,
    },
    /// Print a random valid FMS file.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        points: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum TowerCommand {
    /// Build a tower and write its top level and provenance sidecar.
    Build {
        input: PathBuf,
        /// TOML file with `depth`, `budget` and `grid`.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        provenance: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum WitnessCommand {
    /// Run the witness pipeline and write a certificate.
    Build(WitnessBuild),
    /// Re-check a certificate from scratch.
    Verify { cert: PathBuf },
}

#[derive(Debug, Args)]
pub struct WitnessBuild {
    pub input: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 12)]
    pub budget: usize,
    #[arg(long, value_parser = parse_grid, default_value = "1/2,1")]
    pub grid: Grid,
    #[arg(long, default_value_t = 64)]
    pub max_levels: usize,
    /// Certificate path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the tower's top level here...
    #[arg(long, requires = "provenance_out")]
    pub tower_out: Option<PathBuf>,
    /// ...and its provenance sidecar here.
    #[arg(long, requires = "tower_out")]
    pub provenance_out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Grid(pub Vec<Rational>);

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    s.split(',')
        .map(|t| {
            let v: Rational = t.parse().map_err(|e| format!("`{t}`: {e}"))?;
            if v.is_negative() {
                return Err(format!("grid value {v} is negative"));
            }
            Ok(v)
        })
        .collect::<std::result::Result<_, _>>()
        .map(Grid)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load_space(path: &Path) -> Result<FiniteMetricSpace> {
    FiniteMetricSpace::from_fms(&read(path)?)
}

fn header(command: &str) -> String {
    format!("{REPORT_HEADER}\ncommand {command}\n")
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Validate { input } => validate(input),
        Command::IsoGroup { input } => iso_group(input),
        Command::Tower(TowerCommand::Build {
            input,
            config,
            out,
            provenance,
        }) => tower_build(input, config, out, provenance),
        Command::Witness(WitnessCommand::Build(args)) => witness_build(args),
        Command::Witness(WitnessCommand::Verify { cert }) => witness_verify(cert),
        Command::Audit {
            input,
            max_subset,
            grid,
            domain,
        } => audit(input, *max_subset, &grid.0, *domain),
        Command::RigidityProbe {
            tower,
            provenance,
            cert,
            iso,
            level,
        } => probe(tower, provenance, cert, iso, *level),
        Command::Generate { seed, points } => {
            if *points == 0 {
                return Err(Error::PreconditionViolated("--points must be >= 1".into()));
            }
            Ok(random_space(&mut seeded(*seed), *points).to_fms())
        }
    }
}

fn validate(input: &Path) -> Result<String> {
    let (_, matrix) = FiniteMetricSpace::parse_fms_unchecked(&read(input)?)?;
    validate_metric(&matrix).map_err(Error::InvalidMetric)?;
    let x = FiniteMetricSpace::from_matrix(matrix)?;
    let mut out = header("validate");
    writeln!(out, "valid, diameter {}", x.diameter()).unwrap();
    writeln!(out, "points {}", x.len()).unwrap();
    Ok(out)
}

fn iso_group(input: &Path) -> Result<String> {
    let x = load_space(input)?;
    let g = enumerate_isometries(&x);
    let mut out = header("iso-group");
    writeln!(out, "order {}", g.order()).unwrap();
    for e in g.elements() {
        writeln!(out, "{}", e.to_line()).unwrap();
    }
    for orbit in g.orbits() {
        let ids: Vec<String> = orbit.iter().map(|p| p.to_string()).collect();
        writeln!(out, "orbit {}", ids.join(" ")).unwrap();
    }
    Ok(out)
}

fn tower_build(input: &Path, config: &Path, out: &Path, provenance: &Path) -> Result<String> {
    let x = load_space(input)?;
    let cfg: TowerConfig = toml::from_str(&read(config)?).map_err(|e| {
        let line = e.span().map_or(0, |_| 1);
        Error::parse(line, e.message().to_string())
    })?;
    let t = Tower::build(x, &cfg)?;
    t.verify()?;
    write(out, &t.top().to_fms())?;
    write(provenance, &t.to_sidecar())?;
    let mut rep = header("tower-build");
    writeln!(rep, "depth {}", t.depth()).unwrap();
    for (l, (size, diam)) in t.level_sizes().iter().zip(t.diameters()).enumerate() {
        writeln!(rep, "level {l} points {size} diameter {diam}").unwrap();
    }
    Ok(rep)
}

fn witness_build(args: &WitnessBuild) -> Result<String> {
    let x = load_space(&args.input)?;
    let cfg = PipelineConfig {
        depth: args.depth,
        reps: args.reps,
        budget: args.budget,
        grid: args.grid.0.clone(),
        max_levels: args.max_levels,
    };
    let run = run_pipeline(&x, &cfg)?;
    let cert = Certificate::from_run(&x, &cfg, &run);
    let json = cert.to_json();
    if let (Some(t), Some(p)) = (&args.tower_out, &args.provenance_out) {
        write(t, &run.tower.top().to_fms())?;
        write(p, &run.tower.to_sidecar())?;
    }
    let Some(out) = &args.out else {
        return Ok(json);
    };
    write(out, &json)?;
    let mut rep = header("witness-build");
    writeln!(rep, "rescaled {}", cert.rescaled).unwrap();
    writeln!(rep, "tower levels {}", run.tower.depth()).unwrap();
    writeln!(rep, "witnesses {}", cert.witnesses.len()).unwrap();
    writeln!(rep, "iso(X0) order {}", cert.iso_base.order).unwrap();
    writeln!(rep, "iso(F) order {}", cert.iso_f.order).unwrap();
    writeln!(rep, "certified").unwrap();
    Ok(rep)
}

fn witness_verify(path: &Path) -> Result<String> {
    let cert = Certificate::from_json(&read(path)?)?;
    verify_certificate(&cert)?;
    let mut rep = header("witness-verify");
    writeln!(rep, "iso(F) order {}", cert.iso_f.order).unwrap();
    writeln!(rep, "certificate ok").unwrap();
    Ok(rep)
}

fn audit(
    input: &Path,
    max_subset: usize,
    grid: &[Rational],
    domain: Option<usize>,
) -> Result<String> {
    let x = load_space(input)?;
    let dom = domain.map(Subset::prefix);
    let rep = finite_injectivity_audit(&x, max_subset, grid, dom.as_ref())?;
    let mut out = header("audit");
    writeln!(out, "checked {}", rep.checked).unwrap();
    writeln!(out, "realized {}", rep.realized.len()).unwrap();
    writeln!(out, "ratio {}", rep.ratio()).unwrap();
    for (k, f) in &rep.unrealized {
        let pairs: Vec<String> = k.iter().zip(f).map(|(p, v)| format!("{p}: {v}")).collect();
        writeln!(out, "unrealized {{{}}}", pairs.join(", ")).unwrap();
    }
    Ok(out)
}

fn probe(tower: &Path, provenance: &Path, cert: &Path, iso: &str, level: usize) -> Result<String> {
    let t = Tower::from_parts(&read(tower)?, &read(provenance)?)?;
    let cert = Certificate::from_json(&read(cert)?)?;
    let witnesses = cert
        .witnesses
        .iter()
        .map(|w| Witness {
            k: w.k,
            e: w.e.clone(),
            j: w.j,
            point: w.point,
        })
        .collect();
    let ws = WitnessSet::new(&t, witnesses);
    let phi = Isometry::parse_line(t.top(), iso.trim())?;
    let mut out = header("rigidity-probe");
    match rigidity_probe(&t, &ws, &phi, level)? {
        ProbeVerdict::Compatible => writeln!(out, "compatible").unwrap(),
        ProbeVerdict::Preserved { level } => writeln!(out, "preserves level {level}").unwrap(),
        v @ ProbeVerdict::Violation { .. } => {
            let ProbeVerdict::Violation {
                x,
                image,
                delta,
                witness,
                distance,
            } = &v
            else {
                unreachable!()
            };
            writeln!(out, "violation x {x} image {image} delta {delta}").unwrap();
            writeln!(
                out,
                "witness {} moved {distance} bound {}",
                witness + 1,
                delta / Rational::from(2)
            )
            .unwrap();
            writeln!(out, "bound holds {}", v.bound_holds()).unwrap();
        }
    }
    Ok(out)
}
