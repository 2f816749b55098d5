use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use twisted::circuit::{self, outcome_probabilities, GateAngle, Sign, Snapshot};
use twisted::io::{fmt_sig, read_counts_csv, round_sig, write_counts_csv, MatrixJson};
use twisted::logic::{compare_predictions, discrimination_analysis};
use twisted::optics::{check_equivalence, phase_calibrate, SetupAngles};
use twisted::qcore::ComplexVector;
use twisted::tomography::{
    mle_reconstruct, setting_grid, simulate_counts, DensityMatrix, MleOptions, TomographyResult,
};

use crate::args::*;

/// Writes via a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn json_text<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn rounded(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    values.into_iter().map(round_sig).collect()
}

#[derive(Serialize)]
struct Amplitudes {
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize)]
struct SnapshotJson {
    snapshot: &'static str,
    amplitudes: Amplitudes,
    probabilities: Vec<f64>,
    rho: MatrixJson,
}

#[derive(Serialize)]
struct RegionsJson {
    sign: String,
    theta: f64,
    snapshots: Vec<SnapshotJson>,
}

pub fn regions(a: &RegionsArgs) -> Result<()> {
    let states = circuit::evolve_regions(&a.sign.sign.params(), GateAngle::new(a.theta));
    let text = match a.out.format {
        Format::Csv => {
            let header = [
                "snapshot", "re00", "im00", "re01", "im01", "re10", "im10", "re11", "im11", "p00", "p01", "p10",
                "p11",
            ];
            let mut rows = Vec::new();
            for (snap, psi) in states.iter() {
                let mut row = vec![snap.label().to_string()];
                for z in psi.entries() {
                    row.push(fmt_sig(z.re));
                    row.push(fmt_sig(z.im));
                }
                row.extend(outcome_probabilities(psi)?.as_array().map(fmt_sig));
                rows.push(row);
            }
            csv_text(&header, rows)?
        }
        Format::Json => {
            let snapshots = states
                .iter()
                .map(|(snap, psi)| {
                    Ok(SnapshotJson {
                        snapshot: snap.label(),
                        amplitudes: Amplitudes {
                            re: rounded(psi.entries().iter().map(|z| z.re)),
                            im: rounded(psi.entries().iter().map(|z| z.im)),
                        },
                        probabilities: rounded(outcome_probabilities(psi)?.as_array()),
                        rho: MatrixJson::from_matrix(&psi.projector()),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            json_text(&RegionsJson { sign: a.sign.sign.to_string(), theta: round_sig(a.theta), snapshots })?
        }
    };
    emit(a.out.out.as_deref(), &text)
}

const SWEEP_HEADER: [&str; 8] = ["theta", "p00", "p01", "p10", "p11", "p_trigger1_cl", "p_trigger0_cl", "divergence"];

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let grid = match a.theta {
        Some(t) => vec![t],
        None => a.grid.points(),
    };
    let rows: Vec<[f64; 8]> = compare_predictions(a.sign.sign, &grid)?
        .into_iter()
        .map(|c| {
            let q = c.quantum.as_array();
            let t = c.classical.trigger;
            [c.theta, q[0], q[1], q[2], q[3], c.classical.table.get(t, 1), c.classical.table.get(t, 0), c.divergence]
        })
        .collect();
    let text = match a.out.format {
        Format::Csv => csv_text(&SWEEP_HEADER, rows.iter().map(|r| r.iter().map(|&x| fmt_sig(x)).collect()))?,
        Format::Json => {
            let objs: Vec<serde_json::Map<String, serde_json::Value>> = rows
                .iter()
                .map(|r| SWEEP_HEADER.iter().zip(r).map(|(k, &v)| (k.to_string(), round_sig(v).into())).collect())
                .collect();
            json_text(&objs)?
        }
    };
    emit(a.out.out.as_deref(), &text)
}

fn target_state(sign: Sign, region: Snapshot, theta: f64) -> ComplexVector {
    circuit::evolve_regions(&sign.params(), GateAngle::new(theta)).get(region).clone()
}

fn matrix_json(rho: &DensityMatrix) -> Result<String> {
    Ok(MatrixJson::from_matrix(rho.matrix()).to_json()? + "\n")
}

fn mle_options(m: &MleArgs) -> MleOptions {
    MleOptions { tol: m.tol, max_iter: m.max_iter }
}

fn result_lines(res: &TomographyResult) -> String {
    let mut s = String::new();
    writeln!(s, "iterations={}", res.iterations).unwrap();
    writeln!(s, "converged={}", res.converged).unwrap();
    writeln!(s, "log_likelihood={}", fmt_sig(res.log_likelihood)).unwrap();
    if let Some(f) = res.fidelity_vs_target {
        writeln!(s, "fidelity={}", fmt_sig(f)).unwrap();
    }
    s
}

pub fn tomo(a: &TomoArgs) -> Result<()> {
    let t = &a.target;
    let psi = target_state(t.sign.sign, t.region, t.theta);
    let target = DensityMatrix::from_pure(&psi)?;
    let noise = (a.noise > 0.0).then_some(a.noise);
    let records = simulate_counts(&target, &setting_grid(), a.shots, a.seed.seed, noise)?;
    let res = mle_reconstruct(&records, mle_options(&a.mle))?.with_target(&target)?;

    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let mut counts = Vec::new();
    write_counts_csv(&records, &mut counts)?;
    write_atomic(&a.out.join("counts.csv"), &counts)?;
    write_atomic(&a.out.join("rho_rec.json"), matrix_json(&res.rho)?.as_bytes())?;
    write_atomic(&a.out.join("rho_th.json"), matrix_json(&target)?.as_bytes())?;

    let mut summary = String::new();
    writeln!(summary, "region={}", t.region.label())?;
    writeln!(summary, "sign={}", t.sign.sign)?;
    writeln!(summary, "theta={}", fmt_sig(t.theta))?;
    writeln!(summary, "shots={}", a.shots)?;
    writeln!(summary, "seed={}", a.seed.seed)?;
    writeln!(summary, "noise={}", fmt_sig(a.noise))?;
    summary.push_str(&result_lines(&res));
    write_atomic(&a.out.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

pub fn reconstruct(a: &ReconstructArgs) -> Result<()> {
    let file = fs::File::open(&a.counts).with_context(|| format!("cannot open {}", a.counts.display()))?;
    let records = read_counts_csv(file)?;
    let mut res = mle_reconstruct(&records, mle_options(&a.mle))?;
    if let Some(region) = a.region {
        res = res.with_target(&DensityMatrix::from_pure(&target_state(a.sign.sign, region, a.theta))?)?;
    }
    let json = matrix_json(&res.rho)?;
    match &a.out {
        Some(p) => {
            write_atomic(p, json.as_bytes())?;
            print!("{}", result_lines(&res));
        }
        None => print!("{json}{}", result_lines(&res)),
    }
    Ok(())
}

pub fn discriminate(a: &DiscriminateArgs) -> Result<()> {
    let r = discrimination_analysis(a.theta);
    let fields = [
        ("theta", r.theta),
        ("p_b0_plus", r.p_b0_plus),
        ("p_b0_minus", r.p_b0_minus),
        ("p_a1_given_b0_plus", r.p_a1_given_b0_plus),
        ("p_a0_given_b0_minus", r.p_a0_given_b0_minus),
        ("rule_success", r.rule_success),
        ("naive_claim", r.naive_claim),
        ("helstrom", r.helstrom),
    ];
    let text = match a.format {
        Format::Csv => {
            let mut s = String::new();
            for (k, v) in fields {
                writeln!(s, "{k}={}", fmt_sig(v))?;
            }
            writeln!(s, "within_helstrom={}", r.within_helstrom)?;
            s
        }
        Format::Json => {
            let mut m: serde_json::Map<String, serde_json::Value> =
                fields.iter().map(|&(k, v)| (k.to_string(), round_sig(v).into())).collect();
            m.insert("within_helstrom".into(), r.within_helstrom.into());
            json_text(&m)?
        }
    };
    emit(a.out.as_deref(), &text)
}

pub fn optics_check(a: &OpticsArgs) -> Result<()> {
    let defaults = SetupAngles::default();
    let angles = SetupAngles {
        hwp_had: a.hwp_had_angle.unwrap_or(defaults.hwp_had),
        hwp_int: a.hwp_int_angle.unwrap_or(defaults.hwp_int),
        hwp_g: a.hwp_g_angle,
    };
    let sign = a.sign.sign;
    let cal = phase_calibrate(sign);
    let checks = check_equivalence(sign, a.theta, angles)?;

    let mut s = String::new();
    writeln!(s, "sign={sign} theta={}", fmt_sig(a.theta))?;
    writeln!(s, "calibrated delta_l={} fidelity={}", fmt_sig(cal.delta_l), fmt_sig(cal.fidelity))?;
    for c in &checks {
        writeln!(
            s,
            "region {} overlap={} probability_total={} {}",
            c.region.label(),
            fmt_sig(c.overlap),
            fmt_sig(c.probability_total),
            if c.pass { "PASS" } else { "FAIL" }
        )?;
    }
    emit(a.out.as_deref(), &s)?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        bail!("{failed} region(s) failed the optics equivalence check");
    }
    Ok(())
}
