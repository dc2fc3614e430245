//! Dataset serialization: JSONL (one individual per line) and a flat CSV
//! alternative with columns id, step_index, label, hold, terminal.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{RdcegError, Result};
use crate::inference::{PathObservation, PathStep, Terminal};
use crate::sim::{Dataset, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    pub fn from_path(path: &Path) -> DatasetFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

pub fn save_dataset(dataset: &Dataset, path: &Path, format: DatasetFormat) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    match format {
        DatasetFormat::Jsonl => {
            writeln!(w, "{}", serde_json::to_string(&dataset.provenance)?)?;
            for obs in &dataset.observations {
                writeln!(w, "{}", serde_json::to_string(obs)?)?;
            }
        }
        DatasetFormat::Csv => {
            writeln!(w, "# {}", serde_json::to_string(&dataset.provenance)?)?;
            writeln!(w, "id,step_index,label,hold,terminal")?;
            for obs in &dataset.observations {
                let terminal = terminal_str(obs.terminal);
                if obs.steps.is_empty() {
                    writeln!(w, "{},,,,{terminal}", obs.id)?;
                }
                for (i, step) in obs.steps.iter().enumerate() {
                    let hold = step.hold.map(|h| h.to_string()).unwrap_or_default();
                    let last = i + 1 == obs.steps.len();
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        obs.id,
                        i,
                        csv_escape(&step.label),
                        hold,
                        if last { terminal } else { "" }
                    )?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    match format {
        DatasetFormat::Jsonl => load_jsonl(reader),
        DatasetFormat::Csv => load_csv(reader),
    }
}

fn load_jsonl<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut provenance: Option<Provenance> = None;
    let mut observations = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if provenance.is_none() && line.contains("rdceg.dataset/") {
            provenance = Some(serde_json::from_str(&line).map_err(|e| RdcegError::Data {
                record: lineno,
                message: format!("bad provenance header: {e}"),
            })?);
            continue;
        }
        let obs: PathObservation = serde_json::from_str(&line).map_err(|e| RdcegError::Data {
            record: lineno,
            message: format!("bad observation: {e}"),
        })?;
        observations.push(obs);
    }
    Ok(Dataset {
        provenance: provemance_or_unknown(provenance, observations.len()),
        observations,
    })
}

fn load_csv<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut provenance: Option<Provenance> = None;
    let mut observations: Vec<PathObservation> = Vec::new();
    let mut current: Option<PathObservation> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if provenance.is_none() {
                provenance = serde_json::from_str(rest.trim()).ok();
            }
            continue;
        }
        if trimmed.starts_with("id,") {
            continue; // header row
        }
        let fields = split_csv(trimmed);
        if fields.len() != 5 {
            return Err(RdcegError::Data {
                record: lineno,
                message: format!("expected 5 columns, got {}", fields.len()),
            });
        }
        let id: u64 = fields[0].parse().map_err(|_| RdcegError::Data {
            record: lineno,
            message: format!("bad id '{}'", fields[0]),
        })?;
        let fresh = current.as_ref().map(|c| c.id != id).unwrap_or(true);
        if fresh {
            if let Some(done) = current.take() {
                observations.push(done);
            }
            current = Some(PathObservation {
                id,
                entry: String::new(),
                steps: Vec::new(),
                terminal: Terminal::CensoredAtStudyEnd,
                censored_hold: None,
            });
        }
        let obs = current.as_mut().unwrap();
        if !fields[2].is_empty() {
            let hold = if fields[3].is_empty() {
                None
            } else {
                let h: f64 = fields[3].parse().map_err(|_| RdcegError::Data {
                    record: lineno,
                    message: format!("bad holding time '{}'", fields[3]),
                })?;
                if h < 0.0 {
                    return Err(RdcegError::Data {
                        record: lineno,
                        message: "negative holding time".into(),
                    });
                }
                Some(h)
            };
            obs.steps.push(PathStep {
                label: fields[2].clone(),
                hold,
            });
        }
        if !fields[4].is_empty() {
            obs.terminal = parse_terminal(&fields[4]).ok_or_else(|| RdcegError::Data {
                record: lineno,
                message: format!("unknown terminal status '{}'", fields[4]),
            })?;
        }
    }
    if let Some(done) = current.take() {
        observations.push(done);
    }
    Ok(Dataset {
        provenance: provemance_or_unknown(provenance, observations.len()),
        observations,
    })
}

fn provemance_or_unknown(p: Option<Provenance>, n: usize) -> Provenance {
    p.unwrap_or(Provenance {
        schema: "rdceg.dataset/1".into(),
        model: "unknown".into(),
        seed: 0,
        population: n,
        generated_at: "unknown".into(),
    })
}

fn terminal_str(t: Terminal) -> &'static str {
    match t {
        Terminal::CriticalTerminated => "critical-terminated",
        Terminal::DroppedOut => "dropped-out",
        Terminal::CensoredAtStudyEnd => "censored-at-study-end",
    }
}

fn parse_terminal(s: &str) -> Option<Terminal> {
    match s {
        "critical-terminated" => Some(Terminal::CriticalTerminated),
        "dropped-out" => Some(Terminal::DroppedOut),
        "censored-at-study-end" => Some(Terminal::CensoredAtStudyEnd),
        _ => None,
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn split_csv(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut field = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                chars.next();
                field.push('"');
            }
            '"' => quoted = !quoted,
            ',' if !quoted => {
                fields.push(std::mem::take(&mut field));
            }
            _ => field.push(c),
        }
    }
    fields.push(field);
    fields
}
