use std::f64::consts::PI;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use twisted::circuit::{Sign, Snapshot};

/// Radians, or a multiple of pi such as `pi/4`, `3pi/4`, `-pi`, `2*pi/3`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase().replace('π', "pi");
    let bad = || format!("invalid angle '{s}'");
    let value = match t.find("pi") {
        None => t.parse::<f64>().map_err(|_| bad())?,
        Some(at) => {
            let coef = t[..at].trim_end_matches('*');
            let coef = match coef {
                "" | "+" => 1.0,
                "-" => -1.0,
                c => c.parse::<f64>().map_err(|_| bad())?,
            };
            let rest = &t[at + 2..];
            let den = match rest.strip_prefix('/') {
                Some(d) => d.parse::<f64>().map_err(|_| bad())?,
                None if rest.is_empty() => 1.0,
                None => return Err(bad()),
            };
            if den == 0.0 {
                return Err(bad());
            }
            coef * PI / den
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

/// `start:stop:n` with angles in [`parse_angle`] syntax.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        twisted::circuit::linspace(self.start, self.stop, self.n)
    }
}

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, n] = parts.as_slice() else {
        return Err(format!("grid '{s}' is not start:stop:n"));
    };
    let n: usize = n.trim().parse().map_err(|_| format!("invalid point count '{n}'"))?;
    if n == 0 {
        return Err("grid needs at least one point".into());
    }
    Ok(Grid { start: parse_angle(start)?, stop: parse_angle(stop)?, n })
}

pub fn parse_sign(s: &str) -> Result<Sign, String> {
    s.parse()
}

pub fn parse_region(s: &str) -> Result<Snapshot, String> {
    match s.parse::<Snapshot>()? {
        r @ (Snapshot::I | Snapshot::II | Snapshot::III) => Ok(r),
        _ => Err(format!("region must be i, ii or iii, got '{s}'")),
    }
}

fn parse_noise(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("invalid noise '{s}'"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("noise {p} outside [0, 1]"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "twisted", version, about = "Twisted-logic two-qubit circuit: states, curves, tomography, optics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Amplitudes, probabilities and density matrices of every circuit snapshot.
    Regions(RegionsArgs),
    /// Quantum vs classical region-III outcome probabilities over a θ grid.
    Sweep(SweepArgs),
    /// Simulate tomography counts for a region state and reconstruct it.
    Tomo(TomoArgs),
    /// Maximum-likelihood reconstruction from a counts CSV.
    Reconstruct(ReconstructArgs),
    /// Discrimination of the U₊ and U₋ branches from region-III outcomes.
    Discriminate(DiscriminateArgs),
    /// Compare the optical setup with the circuit snapshots.
    OpticsCheck(OpticsArgs),
}

#[derive(Debug, Args)]
pub struct SignArg {
    /// Branch of the initial unitary.
    #[arg(long, value_parser = parse_sign, default_value = "+", allow_hyphen_values = true)]
    pub sign: Sign,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RegionsArgs {
    #[command(flatten)]
    pub sign: SignArg,
    /// G-gate parameter θ.
    #[arg(long, value_parser = parse_angle, default_value = "pi/2", allow_hyphen_values = true)]
    pub theta: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sign: SignArg,
    /// θ grid as start:stop:n.
    #[arg(long, value_parser = parse_grid, default_value = "0:pi/2:91", conflicts_with = "theta", allow_hyphen_values = true)]
    pub grid: Grid,
    /// A single θ instead of a grid.
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    #[arg(long, env = "TWISTED_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    #[command(flatten)]
    pub sign: SignArg,
    /// Circuit region of the target state.
    #[arg(long, value_parser = parse_region, default_value = "i")]
    pub region: Snapshot,
    #[arg(long, value_parser = parse_angle, default_value = "pi/2", allow_hyphen_values = true)]
    pub theta: f64,
}

#[derive(Debug, Args)]
pub struct MleArgs {
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct TomoArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub shots: u64,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Depolarizing probability p.
    #[arg(long, value_parser = parse_noise, default_value = "0")]
    pub noise: f64,
    #[command(flatten)]
    pub mle: MleArgs,
    /// Directory for counts.csv, rho_rec.json, rho_th.json and summary.txt.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Counts CSV as written by `tomo`.
    #[arg(long)]
    pub counts: PathBuf,
    /// Report fidelity against this region's state.
    #[arg(long, value_parser = parse_region)]
    pub region: Option<Snapshot>,
    #[command(flatten)]
    pub sign: SignArg,
    #[arg(long, value_parser = parse_angle, default_value = "pi/2", allow_hyphen_values = true)]
    pub theta: f64,
    #[command(flatten)]
    pub mle: MleArgs,
    /// Reconstructed matrix JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiscriminateArgs {
    #[arg(long, value_parser = parse_angle, default_value = "pi/2", allow_hyphen_values = true)]
    pub theta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `csv` prints key=value lines.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct OpticsArgs {
    #[command(flatten)]
    pub sign: SignArg,
    #[arg(long, value_parser = parse_angle, default_value = "pi/2", allow_hyphen_values = true)]
    pub theta: f64,
    /// Override the Hadamard plate on A (default pi/8).
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub hwp_had_angle: Option<f64>,
    /// Override the plate inside the interferometer (default 3pi/8).
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub hwp_int_angle: Option<f64>,
    /// Override the G plate on B (default θ/4).
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    pub hwp_g_angle: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn angles() {
        assert_eq!(parse_angle("0").unwrap(), 0.0);
        assert_eq!(parse_angle("1.25").unwrap(), 1.25);
        assert_eq!(parse_angle("pi/2").unwrap(), PI / 2.0);
        assert_eq!(parse_angle("PI/4").unwrap(), PI / 4.0);
        assert_eq!(parse_angle("3pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_angle("2*pi/3").unwrap(), 2.0 * PI / 3.0);
        assert_eq!(parse_angle("-pi").unwrap(), -PI);
        assert_eq!(parse_angle("π/8").unwrap(), PI / 8.0);
        for bad in ["", "abc", "pi/", "pi/0", "pix", "1..2", "inf", "pi2"] {
            assert!(parse_angle(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn grids() {
        let g = parse_grid("0:pi/2:3").unwrap();
        assert_eq!(g.points(), vec![0.0, PI / 4.0, PI / 2.0]);
        assert_eq!(parse_grid("1:2:1").unwrap().points(), vec![1.0]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("0:x:3").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
