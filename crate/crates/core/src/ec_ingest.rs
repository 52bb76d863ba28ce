//! Electronic-conspicuity traffic ingestion.
//!
//! The wire format is one comma-separated UTF-8 record per datagram:
//!
//! ```text
//! epoch,icao,receiver,lat,lon,alt_ft,heading,speed_kn,callsign
//! ```
//!
//! with an optional trailing newline. Parsed records are timestamped on
//! arrival and the transport delay between capture and arrival is
//! compensated by dead-reckoning the position forward along the reported
//! velocity, so downstream consumers see a best estimate of where the
//! flight is *now*, not where it was when the datagram was captured.

use crate::geodesy::{destination_point, GeoPoint};
use crate::units::{feet_to_metres, knots_to_mps};
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::Sender;
use std::sync::Arc;
use thiserror::Error;

/// Default staleness cutoff for latency compensation, seconds.
pub const DEFAULT_STALENESS_LIMIT_S: f64 = 10.0;

/// Wire-format column names, in record order.
pub const COLUMNS: [&str; 9] = [
    "epoch",
    "transponder",
    "receiver",
    "latitude",
    "longitude",
    "altitude_ft",
    "heading",
    "speed_kn",
    "callsign",
];

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("malformed field in column \"{column}\": {reason}")]
    MalformedField {
        column: &'static str,
        reason: String,
    },
    #[error("truncated record: expected {expected} columns, found {found}")]
    TruncatedRecord { expected: usize, found: usize },
    #[error("record is not valid UTF-8")]
    NotUtf8,
    #[error("stale message: latency {latency_s:.3} s exceeds limit {limit_s:.3} s")]
    StaleMessage { latency_s: f64, limit_s: f64 },
    #[error("message clock ahead of engine clock by {0:.3} s")]
    ClockSkew(f64),
}

/// One parsed EC datagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcMessage {
    /// Capture time at the EC network, Unix seconds.
    pub epoch: i64,
    /// 6-hex-digit transponder id, uppercase.
    pub icao: String,
    /// Receiving station short code.
    pub receiver: String,
    pub lat: f64,
    pub lon: f64,
    pub alt_ft: f64,
    /// Degrees [0, 360).
    pub heading: f64,
    /// Knots, >= 0.
    pub speed_kn: f64,
    /// At most 8 characters.
    pub callsign: String,
}

/// A latency-compensated flight state in engine units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub icao: String,
    pub position: GeoPoint,
    /// Degrees [0, 360).
    pub heading: f64,
    /// Metres per second.
    pub speed_mps: f64,
    /// Engine-clock time this track point was produced, seconds.
    pub observed_at: f64,
    /// Transport delay that was compensated, seconds.
    pub latency_s: f64,
}

fn malformed(column: &'static str, reason: impl Into<String>) -> IngestError {
    IngestError::MalformedField {
        column,
        reason: reason.into(),
    }
}

fn parse_f64(column: &'static str, raw: &str) -> Result<f64, IngestError> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| malformed(column, format!("{raw:?} is not a number")))
        .and_then(|v| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(malformed(column, "value is not finite"))
            }
        })
}

/// Parse one datagram payload into an [`EcMessage`], validating every column.
pub fn parse_message(raw: &[u8]) -> Result<EcMessage, IngestError> {
    let text = std::str::from_utf8(raw).map_err(|_| IngestError::NotUtf8)?;
    let line = text.trim_end_matches(['\r', '\n']);
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != COLUMNS.len() {
        return Err(IngestError::TruncatedRecord {
            expected: COLUMNS.len(),
            found: fields.len(),
        });
    }

    let epoch = fields[0].trim().parse::<i64>().map_err(|_| {
        malformed(
            "epoch",
            format!("{:?} is not an integer timestamp", fields[0]),
        )
    })?;
    if epoch <= 0 {
        return Err(malformed("epoch", "timestamp must be positive"));
    }

    let icao = fields[1].trim();
    if icao.len() != 6
        || !icao
            .chars()
            .all(|c| c.is_ascii_digit() || ('A'..='F').contains(&c))
    {
        return Err(malformed(
            "transponder",
            format!("{icao:?} is not a 6-digit uppercase hex id"),
        ));
    }

    let receiver = fields[2].trim();
    if receiver.is_empty() {
        return Err(malformed("receiver", "receiver code is empty"));
    }

    let lat = parse_f64("latitude", fields[3])?;
    if !(-90.0..=90.0).contains(&lat) {
        return Err(malformed("latitude", format!("{lat} outside [-90, 90]")));
    }
    let lon = parse_f64("longitude", fields[4])?;
    if !(-180.0..=180.0).contains(&lon) {
        return Err(malformed("longitude", format!("{lon} outside [-180, 180]")));
    }
    let alt_ft = parse_f64("altitude_ft", fields[5])?;
    if feet_to_metres(alt_ft) < crate::geodesy::MIN_ALT_M {
        return Err(malformed(
            "altitude_ft",
            format!("{alt_ft} ft below usable range"),
        ));
    }
    let heading = parse_f64("heading", fields[6])?;
    if !(0.0..360.0).contains(&heading) {
        return Err(malformed("heading", format!("{heading} outside [0, 360)")));
    }
    let speed_kn = parse_f64("speed_kn", fields[7])?;
    if speed_kn < 0.0 {
        return Err(malformed("speed_kn", "speed must be non-negative"));
    }

    let callsign = fields[8].trim();
    if callsign.len() > 8 {
        return Err(malformed(
            "callsign",
            format!("{callsign:?} longer than 8 characters"),
        ));
    }

    Ok(EcMessage {
        epoch,
        icao: icao.to_string(),
        receiver: receiver.to_string(),
        lat,
        lon,
        alt_ft,
        heading,
        speed_kn,
        callsign: callsign.to_string(),
    })
}

/// Render a message in the canonical wire form (no trailing newline).
pub fn serialize_message(msg: &EcMessage) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        msg.epoch,
        msg.icao,
        msg.receiver,
        msg.lat,
        msg.lon,
        msg.alt_ft,
        msg.heading,
        msg.speed_kn,
        msg.callsign
    )
}

/// Dead-reckon a message to the engine clock `now`, converting to engine
/// units (metres, m/s). The position advances `speed * latency` along the
/// reported heading; altitude is held (the wire format carries no vertical
/// rate).
pub fn compensate_latency(
    msg: &EcMessage,
    now: f64,
    staleness_limit_s: f64,
) -> Result<TrackPoint, IngestError> {
    let latency = now - msg.epoch as f64;
    if latency < 0.0 {
        return Err(IngestError::ClockSkew(-latency));
    }
    if latency > staleness_limit_s {
        return Err(IngestError::StaleMessage {
            latency_s: latency,
            limit_s: staleness_limit_s,
        });
    }
    let speed_mps = knots_to_mps(msg.speed_kn);
    let alt_m = feet_to_metres(msg.alt_ft);
    let reported = GeoPoint {
        lat: msg.lat,
        lon: msg.lon,
        alt_m,
    };
    let position = destination_point(&reported, msg.heading, speed_mps * latency, alt_m);
    Ok(TrackPoint {
        icao: msg.icao.clone(),
        position,
        heading: msg.heading,
        speed_mps,
        observed_at: now,
        latency_s: latency,
    })
}

/// Counters shared between an ingest loop and its supervisor.
#[derive(Debug, Default)]
pub struct IngestCounters {
    pub accepted: AtomicU64,
    pub dropped_malformed: AtomicU64,
    pub dropped_stale: AtomicU64,
}

impl IngestCounters {
    pub fn accepted(&self) -> u64 {
        self.accepted.load(Ordering::Relaxed)
    }
    pub fn dropped_malformed(&self) -> u64 {
        self.dropped_malformed.load(Ordering::Relaxed)
    }
    pub fn dropped_stale(&self) -> u64 {
        self.dropped_stale.load(Ordering::Relaxed)
    }
}

/// Drive datagrams from `source` onto `sink` until the source ends or
/// `stop` is raised. Every valid datagram becomes exactly one [`TrackPoint`]
/// on the sink, in arrival order; malformed or stale datagrams are counted
/// and dropped, never fatal.
///
/// `clock` supplies the engine time used for latency compensation.
pub fn ingest_loop<S, C>(
    source: S,
    sink: &Sender<TrackPoint>,
    mut clock: C,
    staleness_limit_s: f64,
    counters: &IngestCounters,
    stop: &AtomicBool,
) where
    S: IntoIterator<Item = Vec<u8>>,
    C: FnMut() -> f64,
{
    for datagram in source {
        if stop.load(Ordering::Relaxed) {
            break;
        }
        let msg = match parse_message(&datagram) {
            Ok(m) => m,
            Err(_) => {
                counters.dropped_malformed.fetch_add(1, Ordering::Relaxed);
                continue;
            }
        };
        match compensate_latency(&msg, clock(), staleness_limit_s) {
            Ok(tp) => {
                counters.accepted.fetch_add(1, Ordering::Relaxed);
                if sink.send(tp).is_err() {
                    break; // receiver hung up
                }
            }
            Err(_) => {
                counters.dropped_stale.fetch_add(1, Ordering::Relaxed);
            }
        }
    }
}

/// Blocking iterator over datagrams received on a UDP socket.
///
/// Yields until `stop` is raised; socket read timeouts are used to poll the
/// stop flag, so the loop winds down within one timeout interval.
pub struct UdpDatagramSource {
    socket: std::net::UdpSocket,
    stop: Arc<AtomicBool>,
}

impl UdpDatagramSource {
    /// Bind the listener. Bind errors surface here, once, at startup.
    pub fn bind(addr: &str, stop: Arc<AtomicBool>) -> std::io::Result<Self> {
        let socket = std::net::UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(std::time::Duration::from_millis(100)))?;
        Ok(UdpDatagramSource { socket, stop })
    }

    pub fn local_addr(&self) -> std::io::Result<std::net::SocketAddr> {
        self.socket.local_addr()
    }
}

impl Iterator for UdpDatagramSource {
    type Item = Vec<u8>;

    fn next(&mut self) -> Option<Vec<u8>> {
        let mut buf = [0u8; 2048];
        loop {
            if self.stop.load(Ordering::Relaxed) {
                return None;
            }
            match self.socket.recv_from(&mut buf) {
                Ok((n, _)) => return Some(buf[..n].to_vec()),
                Err(e)
                    if e.kind() == std::io::ErrorKind::WouldBlock
                        || e.kind() == std::io::ErrorKind::TimedOut =>
                {
                    continue;
                }
                Err(_) => return None,
            }
        }
    }
}
