use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use super::heatmap::{heatmap, render_ppm, spatial_entropy, Heatmap};
use super::metrics::{dwell_time, free_exploration_time, response_times};
use super::AnalyticsError;
use crate::agent::log::mean_std;
use crate::harness::{Condition, SessionLog};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
const PPM_SCALE: usize = 8;

/// One CSV row. Empty fields mean "not applicable".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub session: String,
    pub world: String,
    pub condition: Condition,
    pub dwell_s: f64,
    pub free_exploration_s: Option<f64>,
    pub entropy_nats: Option<f64>,
    pub n_nav_requests: usize,
    pub mean_response_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Aggregate {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().collect();
        mean_std(&v).map(|(mean, std)| Aggregate { mean, std, n: v.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub world: String,
    pub condition: Condition,
    pub dwell_s: Option<Aggregate>,
    pub free_exploration_s: Option<Aggregate>,
    pub entropy_nats: Option<Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileError {
    pub file: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cell_size_m: f64,
    pub rows: Vec<MetricRow>,
    pub groups: Vec<GroupSummary>,
    pub errors: Vec<FileError>,
}

/// Computes the metrics of one log.
pub fn metric_row(session: &str, log: &SessionLog, cell_size_m: f64) -> Result<MetricRow, AnalyticsError> {
    let dwell_s = dwell_time(log)?;
    let free_exploration_s = free_exploration_time(log)?;
    let entropy_nats = match heatmap(log, cell_size_m, true) {
        Ok(h) => spatial_entropy(&h).ok().map(|e| e.h),
        Err(AnalyticsError::EmptyTrajectory) => None,
        Err(e) => return Err(e),
    };
    let rts = response_times(log);
    Ok(MetricRow {
        session: session.to_string(),
        world: log.header.world.clone(),
        condition: log.header.condition,
        dwell_s,
        free_exploration_s,
        entropy_nats,
        n_nav_requests: log.nav_requests.len(),
        mean_response_s: mean_std(&rts).map(|(m, _)| m),
    })
}

pub fn group_rows(rows: &[MetricRow]) -> Vec<GroupSummary> {
    let mut groups: BTreeMap<(String, Condition), Vec<&MetricRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.world.clone(), r.condition)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((world, condition), rs)| GroupSummary {
            world,
            condition,
            dwell_s: Aggregate::of(rs.iter().map(|r| r.dwell_s)),
            free_exploration_s: Aggregate::of(rs.iter().filter_map(|r| r.free_exploration_s)),
            entropy_nats: Aggregate::of(rs.iter().filter_map(|r| r.entropy_nats)),
        })
        .collect()
}

impl MetricReport {
    pub fn from_rows(cell_size_m: f64, rows: Vec<MetricRow>, errors: Vec<FileError>) -> Self {
        let groups = group_rows(&rows);
        Self { cell_size_m, rows, groups, errors }
    }

    fn group(&self, world: &str, c: Condition) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.world == world && g.condition == c)
    }

    pub fn to_csv(&self) -> Result<String, AnalyticsError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| AnalyticsError::Csv(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| AnalyticsError::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn summary_text(&self) -> String {
        let fmt = |a: &Option<Aggregate>| match a {
            Some(a) => format!("{:.2} ± {:.2} (n={})", a.mean, a.std, a.n),
            None => "n/a".to_string(),
        };
        let mean = |a: &Option<Aggregate>| a.map(|a| a.mean);
        let ratio = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) if b > 0.0 => format!("{:.2}x", a / b),
            _ => "n/a".to_string(),
        };

        let mut s = String::new();
        let _ = writeln!(s, "Session metrics ({} logs, cell size {} m)", self.rows.len(), self.cell_size_m);
        let _ = writeln!(s, "Bot sessions only: numbers exercise the pipeline and are not human results.");
        let worlds: Vec<&str> = {
            let mut w: Vec<&str> = self.groups.iter().map(|g| g.world.as_str()).collect();
            w.dedup();
            w
        };
        for world in &worlds {
            let _ = writeln!(s, "\n[{world}]");
            for g in self.groups.iter().filter(|g| g.world == *world) {
                let _ = writeln!(
                    s,
                    "  {}  dwell_s {}  free_exploration_s {}  entropy_nats {}",
                    g.condition,
                    fmt(&g.dwell_s),
                    fmt(&g.free_exploration_s),
                    fmt(&g.entropy_nats)
                );
            }
            let get = |c| self.group(world, c);
            let a = get(Condition::OnDemand);
            let b = get(Condition::FixedRoute);
            let c = get(Condition::Control);
            let dwell = |g: Option<&GroupSummary>| g.and_then(|g| mean(&g.dwell_s));
            let free = |g: Option<&GroupSummary>| g.and_then(|g| mean(&g.free_exploration_s));
            let _ = writeln!(s, "  dwell ratio A/B {}  A/C {}", ratio(dwell(a), dwell(b)), ratio(dwell(a), dwell(c)));
            let _ = writeln!(s, "  free exploration ratio A/B {}  A/C n/a (no guide in C)", ratio(free(a), free(b)));
            let mut order: Vec<(Condition, f64)> = self
                .groups
                .iter()
                .filter(|g| g.world == *world)
                .filter_map(|g| mean(&g.entropy_nats).map(|m| (g.condition, m)))
                .collect();
            order.sort_by(|x, y| y.1.total_cmp(&x.1));
            let line: Vec<String> = order.iter().map(|(c, m)| format!("{c} ({m:.2})")).collect();
            let _ = writeln!(s, "  entropy ordering: {}", line.join(" > "));
        }
        let _ = writeln!(s, "\nHuman-study reference values (not expected from bots):");
        let _ = writeln!(s, "  dwell time, A vs B and C: 1.5-1.7 times longer");
        let _ = writeln!(s, "  free exploration time, A vs B and C: 3-5 times longer");
        let _ = writeln!(s, "  entropy Museum: C (6.49) > B (5.82) > A (5.75)");
        let _ = writeln!(s, "  entropy Ruina: C (5.57) > B (5.30) > A (4.90)");
        if !self.errors.is_empty() {
            let _ = writeln!(s, "\nErrors ({}):", self.errors.len());
            for e in &self.errors {
                let _ = writeln!(s, "  {}: {}", e.file, e.message);
            }
        }
        s
    }
}

struct Analyzed {
    row: MetricRow,
    heatmap: Option<Heatmap>,
}

fn analyze_file(path: &FsPath, cell_size_m: f64) -> Result<Analyzed, AnalyticsError> {
    let text = std::fs::read_to_string(path).map_err(|e| AnalyticsError::Io(e.to_string()))?;
    let log = SessionLog::from_jsonl(&text)?;
    let session = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let row = metric_row(&session, &log, cell_size_m)?;
    let heatmap = heatmap(&log, cell_size_m, true).ok();
    Ok(Analyzed { row, heatmap })
}

/// Log files (`*.jsonl`) in `dir`, sorted by name.
pub fn log_files(dir: &FsPath) -> Result<Vec<PathBuf>, AnalyticsError> {
    let entries = std::fs::read_dir(dir).map_err(|e| AnalyticsError::Io(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

/// Analyzes every log in `logs_dir`. When `out_dir` is given, writes
/// `metrics.csv`, `summary.txt` and one `heatmap_<session>.ppm` per log.
pub fn summarize(logs_dir: &FsPath, cell_size_m: f64, out_dir: Option<&FsPath>) -> Result<MetricReport, AnalyticsError> {
    let files = log_files(logs_dir)?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(files.len().max(1));
    let chunk = files.len().div_ceil(workers).max(1);
    let results: Vec<Result<Analyzed, AnalyticsError>> = std::thread::scope(|s| {
        let handles: Vec<_> = files
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|p| analyze_file(p, cell_size_m)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("analysis worker")).collect()
    });

    let mut rows = Vec::new();
    let mut maps = Vec::new();
    let mut errors = Vec::new();
    for (path, res) in files.iter().zip(results) {
        match res {
            Ok(a) => {
                if let Some(h) = a.heatmap {
                    maps.push((a.row.session.clone(), h));
                }
                rows.push(a.row);
            }
            Err(e) => errors.push(FileError {
                file: path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
                message: e.to_string(),
            }),
        }
    }
    if rows.is_empty() {
        return Err(AnalyticsError::NoValidLogs(errors.len()));
    }
    let report = MetricReport::from_rows(cell_size_m, rows, errors);

    if let Some(out) = out_dir {
        let io = |p: &FsPath, e: std::io::Error| AnalyticsError::Io(format!("{}: {e}", p.display()));
        std::fs::create_dir_all(out).map_err(|e| io(out, e))?;
        let write = |name: &str, bytes: &[u8]| {
            let p = out.join(name);
            std::fs::write(&p, bytes).map_err(|e| io(&p, e))
        };
        write(METRICS_FILE, report.to_csv()?.as_bytes())?;
        write(SUMMARY_FILE, report.summary_text().as_bytes())?;
        for (session, h) in &maps {
            write(&format!("heatmap_{session}.ppm"), &render_ppm(h, PPM_SCALE))?;
        }
    }
    Ok(report)
}
