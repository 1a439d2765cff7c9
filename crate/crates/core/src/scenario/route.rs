use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scalar::Scalar;

pub const MAX_GRADE: f64 = 0.25;
const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Inbound,
    Outbound,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Inbound => "inbound",
            Direction::Outbound => "outbound",
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Inbound => Direction::Outbound,
            Direction::Outbound => Direction::Inbound,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inbound" => Ok(Direction::Inbound),
            "outbound" => Ok(Direction::Outbound),
            other => Err(SimError::invalid("direction", format!("`{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoutePoint<T> {
    pub lat: T,
    pub lon: T,
    /// Cumulative distance, m.
    pub s: T,
    /// Posted limit on the segment starting here, m/s.
    pub v_lim: T,
    pub z: T,
    /// Degrees clockwise from north.
    pub heading_deg: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteProfile<T> {
    pub id: String,
    pub direction: Direction,
    pub month: u8,
    pub points: Vec<RoutePoint<T>>,
    /// Rise over run of each segment, clamped to +-0.25.
    #[serde(skip)]
    grades: Vec<T>,
}

/// Initial great-circle bearing from `a` to `b`, degrees in [0, 360).
pub fn bearing_deg<T: Scalar>(lat_a: T, lon_a: T, lat_b: T, lon_b: T) -> T {
    let (p1, p2) = (lat_a.to_radians(), lat_b.to_radians());
    let dl = (lon_b - lon_a).to_radians();
    let y = dl.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos();
    normalize_heading(y.atan2(x).to_degrees())
}

pub fn normalize_heading<T: Scalar>(deg: T) -> T {
    let full = T::lit(360.0);
    let h = deg % full;
    let h = if h < T::zero() { h + full } else { h };
    if h >= full {
        T::zero()
    } else {
        h
    }
}

/// Haversine distance, m.
pub fn great_circle_m<T: Scalar>(lat_a: T, lon_a: T, lat_b: T, lon_b: T) -> T {
    let (p1, p2) = (lat_a.to_radians(), lat_b.to_radians());
    let dp = p2 - p1;
    let dl = (lon_b - lon_a).to_radians();
    let half = T::lit(0.5);
    let h = (dp * half).sin().powi(2) + p1.cos() * p2.cos() * (dl * half).sin().powi(2);
    T::lit(2.0 * EARTH_RADIUS_M) * h.sqrt().min(T::one()).asin()
}

impl<T: Scalar> RouteProfile<T> {
    pub fn new(id: String, direction: Direction, month: u8, points: Vec<RoutePoint<T>>) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(SimError::invalid("route", format!("{id}: month {month} outside 1..12")));
        }
        if points.len() < 2 {
            return Err(SimError::invalid("route", format!("{id}: need at least 2 points")));
        }
        for (i, p) in points.iter().enumerate() {
            let row = i + 1;
            let fields = [p.lat, p.lon, p.s, p.v_lim, p.z, p.heading_deg];
            if fields.iter().any(|v| !v.is_finite()) {
                return Err(SimError::Record { record: row, message: "non-finite value".into() });
            }
            if !(p.v_lim > T::zero()) {
                return Err(SimError::Record { record: row, message: "speed limit must be positive".into() });
            }
            if p.heading_deg < T::zero() || p.heading_deg >= T::lit(360.0) {
                return Err(SimError::Record { record: row, message: "heading outside [0, 360)".into() });
            }
            if i > 0 && p.s <= points[i - 1].s {
                return Err(SimError::Record {
                    record: row,
                    message: format!("distance {} not greater than previous {}", p.s, points[i - 1].s),
                });
            }
        }
        let limit = T::lit(MAX_GRADE);
        let grades = points
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let g = (w[1].z - w[0].z) / (w[1].s - w[0].s);
                if g.abs() > limit {
                    log::warn!("route {id}: grade {g:.3} on segment {} clamped to +-{MAX_GRADE}", i + 1);
                }
                g.clamp_to(-limit, limit)
            })
            .collect();
        Ok(Self { id, direction, month, points, grades })
    }

    pub fn length(&self) -> T {
        self.points[self.points.len() - 1].s - self.points[0].s
    }

    pub fn start_s(&self) -> T {
        self.points[0].s
    }

    pub fn end_s(&self) -> T {
        self.points[self.points.len() - 1].s
    }

    pub fn grades(&self) -> &[T] {
        &self.grades
    }

    /// Segment containing distance `s`, in `0..points.len() - 1`.
    pub fn segment_at(&self, s: T) -> usize {
        let n = self.points.len();
        if s <= self.points[0].s {
            return 0;
        }
        let p = self.points.partition_point(|pt| pt.s <= s);
        p.saturating_sub(1).min(n - 2)
    }

    pub fn grade_at(&self, s: T) -> T {
        self.grades[self.segment_at(s)]
    }

    pub fn limit_at(&self, s: T) -> T {
        self.points[self.segment_at(s)].v_lim
    }

    pub fn heading_at(&self, s: T) -> T {
        self.points[self.segment_at(s)].heading_deg
    }

    pub fn net_elevation_change(&self) -> T {
        self.points[self.points.len() - 1].z - self.points[0].z
    }

    pub fn first(&self) -> &RoutePoint<T> {
        &self.points[0]
    }

    pub fn last(&self) -> &RoutePoint<T> {
        &self.points[self.points.len() - 1]
    }

    /// Same road driven the other way: distances re-based, headings flipped.
    pub fn reversed(&self, id: String) -> Result<Self> {
        let end = self.end_s();
        let n = self.points.len();
        let pts = (0..n)
            .rev()
            .map(|i| {
                let p = self.points[i];
                // the segment ending at p (reversed) carries the limit of the
                // original segment that ended at p
                let lim = if i == 0 { p.v_lim } else { self.points[i - 1].v_lim };
                RoutePoint {
                    s: end - p.s,
                    v_lim: lim,
                    heading_deg: normalize_heading(p.heading_deg + T::lit(180.0)),
                    ..p
                }
            })
            .collect();
        Self::new(id, self.direction.reversed(), self.month, pts)
    }

    /// Applies `f` to every point and re-validates.
    pub fn map_points(&self, f: impl Fn(&RoutePoint<T>) -> RoutePoint<T>) -> Result<Self> {
        Self::new(self.id.clone(), self.direction, self.month, self.points.iter().map(f).collect())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "route".into());
        let is_json = path.extension().map(|e| e.eq_ignore_ascii_case("json")).unwrap_or(false)
            || text.trim_start().starts_with(['[', '{']);
        if is_json {
            parse_route_json(&text, &stem)
        } else {
            parse_route_csv(&text, &stem)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# id = {}\n# direction = {}\n# month = {}\nlat,lon,s_m,v_lim_mps,z_m,heading_deg\n",
            self.id, self.direction, self.month
        );
        for p in &self.points {
            out.push_str(&format!(
                "{:.6},{:.6},{:.2},{:.3},{:.2},{:.2}\n",
                p.lat.as_f64(),
                p.lon.as_f64(),
                p.s.as_f64(),
                p.v_lim.as_f64(),
                p.z.as_f64(),
                p.heading_deg.as_f64()
            ));
        }
        out
    }
}

#[derive(Debug, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
    s_m: f64,
    v_lim_mps: f64,
    z_m: f64,
    #[serde(default)]
    heading_deg: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawRouteJson {
    Points(Vec<RawPoint>),
    Full {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        direction: Option<Direction>,
        #[serde(default)]
        month: Option<u8>,
        points: Vec<RawPoint>,
    },
}

struct RouteMeta {
    id: String,
    direction: Direction,
    month: u8,
}

fn build_route<T: Scalar>(meta: RouteMeta, raw: Vec<RawPoint>) -> Result<RouteProfile<T>> {
    let n = raw.len();
    if n < 2 {
        return Err(SimError::invalid("route", format!("{}: need at least 2 points", meta.id)));
    }
    for (i, w) in raw.windows(2).enumerate() {
        if !(w[1].s_m > w[0].s_m) {
            return Err(SimError::Record {
                record: i + 2,
                message: format!("distance {} does not increase (previous {})", w[1].s_m, w[0].s_m),
            });
        }
    }
    let points = (0..n)
        .map(|i| {
            let r = &raw[i];
            let heading = match r.heading_deg {
                Some(h) => h,
                None => {
                    let (a, b) = if i + 1 < n { (&raw[i], &raw[i + 1]) } else { (&raw[i - 1], &raw[i]) };
                    bearing_deg(a.lat, a.lon, b.lat, b.lon)
                }
            };
            RoutePoint {
                lat: T::lit(r.lat),
                lon: T::lit(r.lon),
                s: T::lit(r.s_m),
                v_lim: T::lit(r.v_lim_mps),
                z: T::lit(r.z_m),
                heading_deg: T::lit(heading),
            }
        })
        .collect();
    RouteProfile::new(meta.id, meta.direction, meta.month, points)
}

fn parse_metadata(text: &str, default_id: &str) -> Result<RouteMeta> {
    let mut meta = RouteMeta { id: default_id.to_string(), direction: Direction::Outbound, month: 1 };
    for line in text.lines().take_while(|l| l.trim_start().starts_with('#')) {
        let body = line.trim_start().trim_start_matches('#');
        if let Some((k, v)) = body.split_once('=') {
            let v = v.trim();
            match k.trim() {
                "id" => meta.id = v.to_string(),
                "direction" => meta.direction = v.parse()?,
                "month" => {
                    meta.month = v.parse().map_err(|e| SimError::parse("route month", e))?;
                }
                _ => {}
            }
        }
    }
    Ok(meta)
}

pub fn parse_route_csv<T: Scalar>(text: &str, default_id: &str) -> Result<RouteProfile<T>> {
    let meta = parse_metadata(text, default_id)?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut raw = Vec::new();
    for (i, rec) in rdr.deserialize::<RawPoint>().enumerate() {
        let rec = rec.map_err(|e| SimError::Record { record: i + 1, message: e.to_string() })?;
        raw.push(rec);
    }
    build_route(meta, raw)
}

pub fn parse_route_json<T: Scalar>(text: &str, default_id: &str) -> Result<RouteProfile<T>> {
    let raw: RawRouteJson = serde_json::from_str(text).map_err(|e| SimError::parse("route json", e))?;
    match raw {
        RawRouteJson::Points(points) => {
            build_route(RouteMeta { id: default_id.to_string(), direction: Direction::Outbound, month: 1 }, points)
        }
        RawRouteJson::Full { id, direction, month, points } => build_route(
            RouteMeta {
                id: id.unwrap_or_else(|| default_id.to_string()),
                direction: direction.unwrap_or(Direction::Outbound),
                month: month.unwrap_or(1),
            },
            points,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flat_two_point_route() {
        let csv = "lat,lon,s_m,v_lim_mps,z_m\n32.0,-81.0,0,20,5\n32.0,-80.99,1000,20,5\n";
        let r: RouteProfile<f64> = parse_route_csv(csv, "flat").unwrap();
        assert_eq!(r.grades(), &[0.0]);
        assert_eq!(r.id, "flat");
        // east-bound bearing derived from coordinates
        assert_relative_eq!(r.points[0].heading_deg, 90.0, epsilon = 0.01);
    }

    #[test]
    fn grade_is_rise_over_run() {
        let csv = "lat,lon,s_m,v_lim_mps,z_m,heading_deg\n0,0,0,20,100,0\n0,0.01,1000,20,110,0\n";
        let r: RouteProfile<f64> = parse_route_csv(csv, "g").unwrap();
        assert_relative_eq!(r.grades()[0], 0.01, epsilon = 1e-15);
    }

    #[test]
    fn decreasing_distance_names_row() {
        let mut csv = String::from("lat,lon,s_m,v_lim_mps,z_m\n");
        let s = [0.0, 100.0, 200.0, 300.0, 400.0, 500.0, 450.0, 600.0];
        for (i, d) in s.iter().enumerate() {
            csv.push_str(&format!("32,{},{},20,0\n", -81.0 + i as f64 * 0.001, d));
        }
        let err = parse_route_csv::<f64>(&csv, "bad").unwrap_err();
        match err {
            SimError::Record { record, .. } => assert_eq!(record, 7),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("record 7"));
    }

    #[test]
    fn json_forms_and_metadata() {
        let arr = r#"[{"lat":0,"lon":0,"s_m":0,"v_lim_mps":10,"z_m":0,"heading_deg":10},
                      {"lat":0,"lon":0.1,"s_m":500,"v_lim_mps":10,"z_m":1}]"#;
        let r: RouteProfile<f64> = parse_route_json(arr, "a").unwrap();
        assert_eq!(r.points.len(), 2);
        assert_eq!(r.points[0].heading_deg, 10.0);
        let full = r#"{"id":"x7","direction":"inbound","month":5,"points":[
            {"lat":0,"lon":0,"s_m":0,"v_lim_mps":10,"z_m":0},
            {"lat":0,"lon":0.1,"s_m":500,"v_lim_mps":10,"z_m":1}]}"#;
        let r: RouteProfile<f64> = parse_route_json(full, "ignored").unwrap();
        assert_eq!((r.id.as_str(), r.direction, r.month), ("x7", Direction::Inbound, 5));

        let csv =
            "# id = r9\n# direction = inbound\n# month = 11\nlat,lon,s_m,v_lim_mps,z_m\n0,0,0,10,0\n0,0.01,900,10,0\n";
        let r: RouteProfile<f64> = parse_route_csv(csv, "ignored").unwrap();
        assert_eq!((r.id.as_str(), r.direction, r.month), ("r9", Direction::Inbound, 11));
    }

    #[test]
    fn invalid_values_rejected() {
        let neg = "lat,lon,s_m,v_lim_mps,z_m\n0,0,0,0,0\n0,0.01,900,10,0\n";
        assert!(matches!(parse_route_csv::<f64>(neg, "n"), Err(SimError::Record { record: 1, .. })));
        let one = "lat,lon,s_m,v_lim_mps,z_m\n0,0,0,10,0\n";
        assert!(parse_route_csv::<f64>(one, "o").is_err());
        let junk = "lat,lon,s_m,v_lim_mps,z_m\n0,0,zero,10,0\n";
        assert!(parse_route_csv::<f64>(junk, "j").is_err());
    }

    #[test]
    fn steep_grade_clamped() {
        let csv = "lat,lon,s_m,v_lim_mps,z_m\n0,0,0,10,0\n0,0.001,100,10,60\n";
        let r: RouteProfile<f64> = parse_route_csv(csv, "steep").unwrap();
        assert_eq!(r.grades()[0], MAX_GRADE);
    }

    #[test]
    fn reversal_preserves_length_and_flips_net_elevation() {
        let csv = "lat,lon,s_m,v_lim_mps,z_m\n0,0,0,10,0\n0,0.01,1000,20,30\n0,0.02,1500,15,50\n";
        let r: RouteProfile<f64> = parse_route_csv(csv, "r").unwrap();
        let b = r.reversed("rb".into()).unwrap();
        assert_eq!(b.length(), r.length());
        assert_eq!(b.net_elevation_change(), -r.net_elevation_change());
        assert_eq!(b.limit_at(100.0), 20.0);
        assert_eq!(b.limit_at(1400.0), 10.0);
        assert_eq!(b.direction, Direction::Inbound);
    }
}
