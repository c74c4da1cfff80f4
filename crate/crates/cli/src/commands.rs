use std::fs;
use std::path::{Path, PathBuf};

use conelift::fixtures;
use conelift::io::{
    fmt_real, ChartFile, ConePointsFile, ConformalEstimateFile, CorrespondenceFile,
    ExtensionReportFile, ImmersionReportFile, MatrixFile, MetricFile, RecoveryReportFile,
    SelfMapFile, SpherePairsFile, SphereSamplesFile,
};
use conelift::{
    cone_contains, cone_convert, cone_lift, cone_project, conformal_to_lorentz,
    extend_cone_isometry, extract_conformal_factor, recover_tau, verify_isometric_immersion,
    verify_lemma1, verify_rigidity, ChartTarget, ConeKind, ConePoint, CorrespondenceSet, Error,
    GridChart, MetricField, RecoveryStatus,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::{
    Common, Fixture, GenArgs, EXIT_INCONSISTENT, EXIT_OK, EXIT_UNDERDETERMINED, EXIT_USAGE,
    EXIT_VALIDATION,
};

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }
}

/// Malformed input is a usage error; well-formed input that fails a
/// mathematical check is a validation failure.
fn classify(context: &Path, e: Error) -> Failure {
    let message = format!("{}: {e}", context.display());
    match e {
        Error::NotOnCone { .. }
        | Error::InvalidCorrespondence(_)
        | Error::NotConformal { .. }
        | Error::NonPositiveFactor { .. }
        | Error::NotLorentz(_)
        | Error::Pole
        | Error::NonPositiveDenominator(_) => Failure::validation(message),
        _ => Failure::usage(message),
    }
}

type CmdResult = Result<u8, Failure>;

fn read_value(path: &Path) -> Result<Value, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, value: Value) -> Result<T, Failure> {
    serde_json::from_value(value).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    parse(path, read_value(path)?)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Writes a report to `--out` or stdout.
fn emit<T: Serialize>(common: &Common, report: &T) -> Result<(), Failure> {
    let text = to_json(report);
    match &common.out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cone_kind(k: i64) -> Result<ConeKind, Failure> {
    ConeKind::from_k(k).map_err(|e| Failure::usage(format!("--k: {e}")))
}

fn status_code(status: RecoveryStatus) -> u8 {
    match status {
        RecoveryStatus::Unique => EXIT_OK,
        RecoveryStatus::Inconsistent => EXIT_INCONSISTENT,
        RecoveryStatus::Underdetermined => EXIT_UNDERDETERMINED,
    }
}

fn load_chart(path: &Path) -> Result<(GridChart, Option<MetricField>), Failure> {
    let file: ChartFile = read(path)?;
    let chart = file.to_chart().map_err(|e| classify(path, e))?;
    let metric = file.to_metric().map_err(|e| classify(path, e))?;
    Ok((chart, metric))
}

fn load_metric(
    chart_path: &Path,
    embedded: Option<MetricField>,
    metric_path: Option<&Path>,
) -> Result<MetricField, Failure> {
    match metric_path {
        Some(path) => {
            let value = read_value(path)?;
            // a chart file with an embedded metric is accepted as well
            let metric = if value.get("target").is_some() {
                parse::<ChartFile>(path, value)?
                    .to_metric()
                    .map_err(|e| classify(path, e))?
            } else {
                Some(
                    parse::<MetricFile>(path, value)?
                        .to_metric()
                        .map_err(|e| classify(path, e))?,
                )
            };
            metric.ok_or_else(|| Failure::usage(format!("{}: metric: missing", path.display())))
        }
        None => embedded.ok_or_else(|| {
            Failure::usage(format!(
                "{}: metric: missing (embed it or pass a metric file)",
                chart_path.display()
            ))
        }),
    }
}

#[derive(Serialize)]
struct VerifyReport {
    pass: bool,
    immersion: ImmersionReportFile,
    projection_residual: String,
    projection_pass: bool,
}

pub fn verify(common: &Common, chart_path: &Path, metric_path: Option<&Path>) -> CmdResult {
    let (chart, embedded) = load_chart(chart_path)?;
    let g = load_metric(chart_path, embedded, metric_path)?;
    if !matches!(chart.target(), ChartTarget::Cone(_)) {
        return Err(Failure::usage(format!(
            "{}: target: expected \"cone\"",
            chart_path.display()
        )));
    }
    let immersion = verify_isometric_immersion(&chart, &g, common.fd_tol)
        .map_err(|e| classify(chart_path, e))?;
    let (projection, projection_pass) = if immersion.cone_violations.is_empty() {
        let flat = chart
            .convert_cone(ConeKind::Minkowski)
            .map_err(|e| classify(chart_path, e))?;
        let r = verify_lemma1(&flat, &g).map_err(|e| classify(chart_path, e))?;
        (r, r <= common.fd_tol)
    } else {
        (f64::NAN, false)
    };
    let report = VerifyReport {
        pass: immersion.pass && projection_pass,
        immersion: ImmersionReportFile::from(&immersion),
        projection_residual: fmt_real(projection),
        projection_pass,
    };
    emit(common, &report)?;
    Ok(if report.pass {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    })
}

#[derive(Serialize)]
struct RigidityFile {
    immersion1: ImmersionReportFile,
    immersion2: ImmersionReportFile,
}

pub fn recover(common: &Common, inputs: &[PathBuf]) -> CmdResult {
    match inputs {
        [pairs] => recover_pairs(common, pairs),
        [c1, c2] => recover_charts(common, c1, c2, None),
        [c1, c2, g] => recover_charts(common, c1, c2, Some(g)),
        _ => Err(Failure::usage(
            "recover takes a pair file, or two charts and a metric",
        )),
    }
}

fn recover_pairs(common: &Common, path: &Path) -> CmdResult {
    let value = read_value(path)?;
    if value.get("k").is_some() {
        let file: CorrespondenceFile = parse(path, value)?;
        let set = file.to_set().map_err(|e| classify(path, e))?;
        let report = recover_tau(&set, common.tol);
        emit(common, &RecoveryReportFile::from(&report))?;
        Ok(status_code(report.status))
    } else {
        let file: SpherePairsFile = parse(path, value)?;
        let pairs = file.to_pairs().map_err(|e| classify(path, e))?;
        let est = conformal_to_lorentz(&pairs, common.tol).map_err(|e| classify(path, e))?;
        emit(common, &ConformalEstimateFile::from(&est))?;
        Ok(status_code(est.status))
    }
}

fn recover_charts(common: &Common, p1: &Path, p2: &Path, pg: Option<&PathBuf>) -> CmdResult {
    let (c1, g1) = load_chart(p1)?;
    let (c2, _) = load_chart(p2)?;
    let g = load_metric(p1, g1, pg.map(PathBuf::as_path))?;
    let report =
        verify_rigidity(&c1, &c2, &g, common.fd_tol, common.tol).map_err(|e| classify(p1, e))?;
    match &report.recovery {
        Some(r) => {
            emit(common, &RecoveryReportFile::from(r))?;
            Ok(status_code(r.status))
        }
        None => {
            emit(
                common,
                &RigidityFile {
                    immersion1: ImmersionReportFile::from(&report.immersion1),
                    immersion2: ImmersionReportFile::from(&report.immersion2),
                },
            )?;
            Ok(EXIT_VALIDATION)
        }
    }
}

pub fn extend(common: &Common, path: &Path) -> CmdResult {
    let file: SelfMapFile = read(path)?;
    let map = file.to_selfmap().map_err(|e| classify(path, e))?;
    let report =
        extend_cone_isometry(&map, common.tol, common.fd_tol).map_err(|e| classify(path, e))?;
    emit(common, &ExtensionReportFile::from(&report))?;
    Ok(status_code(report.status()))
}

fn load_points(path: &Path) -> Result<(ConeKind, usize, Vec<ConePoint>), Failure> {
    load_points_value(path, read_value(path)?)
}

pub fn embed(common: &Common, path: &Path, to: i64) -> CmdResult {
    let target = cone_kind(to)?;
    let (_, n, points) = load_points(path)?;
    let converted = points
        .iter()
        .map(|p| cone_convert(p, target))
        .collect::<conelift::Result<Vec<_>>>()
        .map_err(|e| classify(path, e))?;
    emit(common, &ConePointsFile::from_points(target, n, &converted))?;
    Ok(EXIT_OK)
}

pub fn project(common: &Common, path: &Path) -> CmdResult {
    let value = read_value(path)?;
    if value.get("target").is_some() {
        let file: ChartFile = parse(path, value)?;
        let chart = file.to_chart().map_err(|e| classify(path, e))?;
        let sphere = chart.project_to_sphere().map_err(|e| classify(path, e))?;
        emit(common, &ChartFile::from_chart(&sphere, None))?;
    } else {
        let (_, n, points) = load_points_value(path, value)?;
        let projected = points
            .iter()
            .map(cone_project)
            .collect::<conelift::Result<Vec<_>>>()
            .map_err(|e| classify(path, e))?;
        emit(common, &SphereSamplesFile::from_points(n, &projected))?;
    }
    Ok(EXIT_OK)
}

fn load_points_value(
    path: &Path,
    value: Value,
) -> Result<(ConeKind, usize, Vec<ConePoint>), Failure> {
    let file: ConePointsFile = parse(path, value)?;
    let (kind, points) = file.to_points().map_err(|e| classify(path, e))?;
    let bad: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| !cone_contains(p, conelift::cone::CONE_TOLERANCE).pass)
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Failure::validation(format!(
            "{}: points off the k={} cone at indices {bad:?}",
            path.display(),
            kind.k()
        )));
    }
    Ok((kind, file.n, points))
}

pub fn lift(common: &Common, path: &Path, metric_path: Option<&Path>, k: i64) -> CmdResult {
    let kind = cone_kind(k)?;
    let (psi, embedded) = load_chart(path)?;
    let g = load_metric(path, embedded, metric_path)?;
    let factor =
        extract_conformal_factor(&psi, &g, common.fd_tol).map_err(|e| classify(path, e))?;
    let chart = cone_lift(&psi, &factor.lambda, kind).map_err(|e| classify(path, e))?;
    emit(common, &ChartFile::from_chart(&chart, Some(&g)))?;
    Ok(EXIT_OK)
}

pub fn gen(common: &Common, args: &GenArgs) -> CmdResult {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
    let fixture_err = |e: Error| Failure::usage(format!("fixture: {e}"));
    if args.n < 2 {
        return Err(Failure::usage("--n: must be at least 2"));
    }
    let nodes = args.nodes.unwrap_or(match args.fixture {
        Fixture::CircleN2 => 512,
        _ => 33,
    });
    let mut files: Vec<(&str, String)> = Vec::new();
    match args.fixture {
        Fixture::CircleN2 => {
            let (phi1, phi2, g) = fixtures::circle_pair(nodes).map_err(fixture_err)?;
            let pairs = CorrespondenceSet::from_charts(&phi1, &phi2).map_err(fixture_err)?;
            files.push((
                "phi1.json",
                to_json(&ChartFile::from_chart(&phi1, Some(&g))),
            ));
            files.push((
                "phi2.json",
                to_json(&ChartFile::from_chart(&phi2, Some(&g))),
            ));
            files.push(("metric.json", to_json(&MetricFile::from_metric(&g))));
            files.push(("pairs.json", to_json(&CorrespondenceFile::from_set(&pairs))));
        }
        Fixture::SphereIdentity => {
            if args.n < 3 {
                return Err(Failure::usage("--n: sphere-identity needs n >= 3"));
            }
            let m = (args.n - 1).min(3);
            let (psi, g) = fixtures::sphere_patch(args.n, m, nodes, 0.25).map_err(fixture_err)?;
            let chart = cone_lift(&psi, &vec![1.0; psi.node_count()], cone_kind(args.k)?)
                .map_err(fixture_err)?;
            files.push((
                "chart.json",
                to_json(&ChartFile::from_chart(&chart, Some(&g))),
            ));
            files.push((
                "sphere.json",
                to_json(&ChartFile::from_chart(&psi, Some(&g))),
            ));
            files.push(("metric.json", to_json(&MetricFile::from_metric(&g))));
        }
        Fixture::TauPair => {
            if args.n < 3 {
                return Err(Failure::usage("--n: tau-pair needs n >= 3"));
            }
            let pair =
                fixtures::tau_pair(args.seed, args.n, 2, nodes, args.steps).map_err(fixture_err)?;
            let kind = cone_kind(args.k)?;
            let c1 = pair.chart1.convert_cone(kind).map_err(fixture_err)?;
            let c2 = pair.chart2.convert_cone(kind).map_err(fixture_err)?;
            let pairs = CorrespondenceSet::from_charts(&c1, &c2).map_err(fixture_err)?;
            files.push((
                "chart1.json",
                to_json(&ChartFile::from_chart(&c1, Some(&pair.metric))),
            ));
            files.push((
                "chart2.json",
                to_json(&ChartFile::from_chart(&c2, Some(&pair.metric))),
            ));
            files.push((
                "metric.json",
                to_json(&MetricFile::from_metric(&pair.metric)),
            ));
            files.push(("pairs.json", to_json(&CorrespondenceFile::from_set(&pairs))));
            files.push((
                "tau.json",
                to_json(&MatrixFile::from_matrix(pair.tau.matrix())),
            ));
        }
        Fixture::ConeSelfmap => {
            if args.n < 3 {
                return Err(Failure::usage("--n: cone-selfmap needs n >= 3"));
            }
            let kind = cone_kind(args.k)?;
            if args.corrupt {
                let map = fixtures::twisted_selfmap(args.n, 5, nodes).map_err(fixture_err)?;
                files.push(("selfmap.json", to_json(&SelfMapFile::from_selfmap(&map))));
            } else {
                let tau =
                    conelift::random_conformal(args.n, args.seed, args.steps, 2.0).into_lorentz();
                let map = fixtures::lorentz_selfmap(&tau, kind, 5, nodes).map_err(fixture_err)?;
                files.push(("selfmap.json", to_json(&SelfMapFile::from_selfmap(&map))));
                files.push(("tau.json", to_json(&MatrixFile::from_matrix(tau.matrix()))));
            }
        }
        Fixture::NonconformalPair => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let pairs = fixtures::nonconformal_pairs(&mut rng, args.n, 4 * (args.n + 1));
            files.push((
                "pairs.json",
                to_json(&SpherePairsFile::from_pairs(args.n, &pairs)),
            ));
        }
    }
    for (name, text) in &files {
        let path = dir.join(name);
        write_file(&path, text)?;
        println!("{}", path.display());
    }
    Ok(EXIT_OK)
}
