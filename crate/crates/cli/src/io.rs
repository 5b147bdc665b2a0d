use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use evgraph::ingest::{self, densest_window, first_window, tumbling_windows, EventWindow};
use evgraph::{RawEvent, SensorGeometry};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EventFormat {
    Csv,
    NcaltechBin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowSelect {
    Densest,
    First,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Event file.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Input encoding; inferred from the extension when omitted (.bin is
    /// N-Caltech binary, anything else CSV).
    #[arg(long)]
    pub format: Option<EventFormat>,
    #[command(flatten)]
    pub geometry: GeometryArgs,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct GeometryArgs {
    /// Sensor width in pixels.
    #[arg(long, default_value_t = 240)]
    pub width: u32,
    /// Sensor height in pixels.
    #[arg(long, default_value_t = 180)]
    pub height: u32,
}

impl GeometryArgs {
    pub fn geometry(&self) -> Result<SensorGeometry> {
        SensorGeometry::new(self.width, self.height).map_err(|e| CliError::Usage(e.to_string()))
    }
}

pub fn infer_format(path: &Path) -> EventFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => EventFormat::NcaltechBin,
        _ => EventFormat::Csv,
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|e| CliError::data(path.display().to_string(), e))
}

pub fn read_events(path: &Path, format: Option<EventFormat>) -> Result<Vec<RawEvent>> {
    let context = path.display().to_string();
    match format.unwrap_or_else(|| infer_format(path)) {
        EventFormat::Csv => {
            ingest::parse_csv(&read_text(path)?).map_err(|e| CliError::data(context, e))
        }
        EventFormat::NcaltechBin => {
            ingest::parse_ncaltech_bin(&read_bytes(path)?).map_err(|e| CliError::data(context, e))
        }
    }
}

/// Events checked against the sensor geometry.
pub fn load_input(args: &InputArgs) -> Result<(Vec<RawEvent>, SensorGeometry)> {
    let geometry = args.geometry.geometry()?;
    let events = read_events(&args.input, args.format)?;
    if let Some((i, e)) = events
        .iter()
        .enumerate()
        .find(|(_, e)| !geometry.contains(e))
    {
        return Err(CliError::data(
            args.input.display().to_string(),
            format!(
                "event {i} at ({}, {}) outside {}x{} sensor",
                e.x, e.y, geometry.width, geometry.height
            ),
        ));
    }
    Ok((events, geometry))
}

pub fn select_windows(
    events: &[RawEvent],
    duration_us: u64,
    select: WindowSelect,
) -> Result<Vec<EventWindow>> {
    if duration_us == 0 {
        return Err(CliError::Usage("window length must be positive".into()));
    }
    if events.is_empty() {
        return Ok(Vec::new());
    }
    let windows = match select {
        WindowSelect::Densest => densest_window(events, duration_us).map(|w| vec![w]),
        WindowSelect::First => first_window(events, duration_us).map(|w| vec![w]),
        WindowSelect::All => tumbling_windows(events, duration_us),
    };
    windows.map_err(|e| CliError::data("window selection", e))
}

/// Writes to `path`, or stdout for `-`.
pub fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if path == Path::new("-") {
        let mut out = std::io::stdout().lock();
        return match out.write_all(bytes).and_then(|_| out.flush()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io(path, e)),
            _ => Ok(()),
        };
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("value serialises");
    s.push('\n');
    s.into_bytes()
}
