//! Synthetic port-drayage dataset with the same schema as the real inputs:
//! routes radiating from a port, per-route city temperatures and weather
//! traces. Everything is drawn from seeded ChaCha8 streams.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::roadload::TruckConfiguration;
use crate::scalar::{celsius_to_kelvin, kmh_to_ms, Scalar};
use crate::scenario::{
    bearing_deg, normalize_heading, CityTemperatureTable, DayType, Direction, RoutePoint, RouteProfile, Scenario,
    WeatherSample, WeatherTrace,
};

/// Port gate used as the origin of every demo route.
pub const PORT_LAT: f64 = 32.08;
pub const PORT_LON: f64 = -81.09;
const M_PER_DEG_LAT: f64 = 111_320.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSpec {
    pub seed: u64,
    pub n_routes: usize,
    pub min_km: f64,
    pub max_km: f64,
    pub spacing_m: f64,
    pub days_per_month: usize,
    pub cities_per_route: usize,
}

impl Default for DemoSpec {
    fn default() -> Self {
        Self {
            seed: 2024,
            n_routes: 60,
            min_km: 15.0,
            max_km: 380.0,
            spacing_m: 100.0,
            days_per_month: 30,
            cities_per_route: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoDataset<T> {
    pub routes: Vec<Arc<RouteProfile<T>>>,
    pub city_temps: Vec<CityTemperatureTable<T>>,
}

/// Monthly mean temperature of a warm coastal climate, degC.
pub fn monthly_mean_c(month: u8) -> f64 {
    19.0 + 9.0 * (2.0 * PI * (month as f64 - 7.0) / 12.0).cos()
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Speed limit along a drayage trip: port zone, arterial, highway, then
/// arterial and local streets at the far end. Signals appear as short
/// low-limit points inside the slow zones.
fn speed_limit_kmh(s: f64, length: f64, zones: &[f64; 4], signal: bool, fast_highway: bool) -> f64 {
    let [port, art_a, art_b, local_b] = *zones;
    let to_end = length - s;
    let slow = if s < port {
        Some(40.0)
    } else if s < port + art_a {
        Some(72.0)
    } else if to_end < local_b {
        Some(56.0)
    } else if to_end < local_b + art_b {
        Some(72.0)
    } else {
        None
    };
    match slow {
        Some(_) if signal => 15.0,
        Some(v) => v,
        None if fast_highway => 113.0,
        None => 105.0,
    }
}

/// One synthetic outbound trip of `km` from the port along `bearing`.
pub fn synth_route<T: Scalar>(
    id: &str,
    km: f64,
    bearing: f64,
    month: u8,
    spacing_m: f64,
    rng: &mut ChaCha8Rng,
) -> Result<RouteProfile<T>> {
    if !(km > 0.0 && spacing_m > 0.0) {
        return Err(SimError::invalid("demo route", "length and spacing must be positive"));
    }
    let length = km * 1000.0;
    let n = (length / spacing_m).ceil() as usize + 1;
    let scale = (km / 100.0).min(1.0);
    let zones = [
        rng.gen_range(1500.0..4000.0) * scale,
        rng.gen_range(3000.0..12000.0) * scale,
        rng.gen_range(3000.0..10000.0) * scale,
        rng.gen_range(1000.0..4000.0) * scale,
    ];
    let fast_highway = rng.gen_bool(0.3);
    let waves: Vec<(f64, f64, f64)> = [(2_000.0, 3.0), (7_000.0, 8.0), (25_000.0, 15.0)]
        .iter()
        .map(|&(wl, amp)| (wl * rng.gen_range(0.7..1.3), amp * rng.gen_range(0.5..1.2), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let trend = rng.gen_range(-40.0..40.0);
    let wander = (rng.gen_range(15.0..35.0), rng.gen_range(20_000.0..60_000.0), rng.gen_range(0.0..2.0 * PI));
    let mut next_signal = rng.gen_range(600.0..2500.0);

    let (mut lat, mut lon) = (PORT_LAT, PORT_LON);
    let mut pts: Vec<(f64, f64, f64, f64, f64)> = Vec::with_capacity(n);
    for i in 0..n {
        let s = (i as f64 * spacing_m).min(length);
        let mut z = 5.0 + trend * s / length;
        for &(wl, amp, ph) in &waves {
            // taper so the ends sit at the trend line
            z += amp * ((2.0 * PI * s / wl + ph).sin() - ph.sin() * (1.0 - s / length));
        }
        let signal = s >= next_signal && i + 1 < n && i > 0;
        if signal {
            next_signal = s + rng.gen_range(800.0..2500.0);
        }
        let v = speed_limit_kmh(s, length, &zones, signal, fast_highway);
        pts.push((lat, lon, s, v, z));
        if i + 1 < n {
            let ds = ((i + 1) as f64 * spacing_m).min(length) - s;
            let hdg = (bearing + wander.0 * (2.0 * PI * s / wander.1 + wander.2).sin()).to_radians();
            lat += ds * hdg.cos() / M_PER_DEG_LAT;
            lon += ds * hdg.sin() / (M_PER_DEG_LAT * lat.to_radians().cos());
        }
    }
    let points = (0..n)
        .map(|i| {
            let (lat, lon, s, v, z) = pts[i];
            let j = if i + 1 < n { i + 1 } else { i };
            let k = if i + 1 < n { i } else { i - 1 };
            let heading = normalize_heading(bearing_deg(pts[k].0, pts[k].1, pts[j].0, pts[j].1));
            RoutePoint {
                lat: T::lit(lat),
                lon: T::lit(lon),
                s: T::lit(s),
                v_lim: kmh_to_ms(T::lit(v)),
                z: T::lit(z),
                heading_deg: T::lit(heading),
            }
        })
        .collect();
    RouteProfile::new(id.to_string(), Direction::Outbound, month, points)
}

/// Flat constant-limit track of `km`; the driver's target equals `kmh`
/// once the compliance factor is applied.
pub fn test_track<T: Scalar>(id: &str, km: f64, kmh: f64, compliance: f64, month: u8) -> Result<RouteProfile<T>> {
    let n = (km * 10.0).ceil() as usize + 1;
    let length = km * 1000.0;
    let points = (0..n)
        .map(|i| {
            let s = (i as f64 * 100.0).min(length);
            RoutePoint {
                lat: T::lit(PORT_LAT),
                lon: T::lit(PORT_LON + s / (M_PER_DEG_LAT * PORT_LAT.to_radians().cos())),
                s: T::lit(s),
                v_lim: kmh_to_ms(T::lit(kmh / compliance)),
                z: T::zero(),
                heading_deg: T::lit(90.0),
            }
        })
        .collect();
    RouteProfile::new(id.to_string(), Direction::Outbound, month, points)
}

/// A route whose elevation rises by `net_rise_m` in a smooth ramp, and its
/// mirrored counterpart that falls by the same amount.
pub fn hill_pair<T: Scalar>(km: f64, net_rise_m: f64, seed: u64) -> Result<(RouteProfile<T>, RouteProfile<T>)> {
    let mut rng = stream(seed, 9_000);
    let up: RouteProfile<T> = synth_route("hill", km, 270.0, 6, 100.0, &mut rng)?;
    let length = up.length().as_f64();
    let z0 = up.points[0].z.as_f64();
    let ramped = up.map_points(|p| {
        let x = p.s.as_f64() / length;
        let ramp = net_rise_m * (x - (2.0 * PI * x).sin() / (2.0 * PI));
        RoutePoint { z: T::lit(z0 + ramp), ..*p }
    })?;
    let ramped = RouteProfile::new("hill-out".into(), Direction::Outbound, 6, ramped.points)?;
    let down = ramped.reversed("hill-in".into())?;
    Ok((ramped, down))
}

/// Daily city temperatures, K, for one route and month.
fn city_table<T: Scalar>(
    route_id: &str,
    month: u8,
    spec: &DemoSpec,
    rng: &mut ChaCha8Rng,
) -> Result<CityTemperatureTable<T>> {
    let mean = monthly_mean_c(month);
    let offsets: Vec<f64> = (0..spec.cities_per_route).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let mut anomaly = 0.0;
    let temps = (0..spec.days_per_month)
        .map(|_| {
            // AR(1) day-to-day anomaly
            anomaly = 0.7 * anomaly + rng.gen_range(-4.0..4.0);
            offsets.iter().map(|o| T::lit(mean + anomaly + o + rng.gen_range(-0.5..0.5) + 273.15)).collect()
        })
        .collect();
    CityTemperatureTable::new(route_id, temps)
}

impl DemoSpec {
    /// Routes alternate outbound/inbound; an inbound route is the reversal
    /// of a freshly drawn outbound trip.
    pub fn generate<T: Scalar>(&self) -> Result<DemoDataset<T>> {
        if self.n_routes == 0 || self.days_per_month == 0 || self.cities_per_route == 0 {
            return Err(SimError::invalid("demo spec", "counts must be positive"));
        }
        if !(self.min_km > 0.0 && self.max_km >= self.min_km) {
            return Err(SimError::invalid("demo spec", "need 0 < min_km <= max_km"));
        }
        let mut routes = Vec::with_capacity(self.n_routes);
        let mut city_temps = Vec::with_capacity(self.n_routes);
        for i in 0..self.n_routes {
            let mut rng = stream(self.seed, i as u64);
            let u: f64 = rng.gen();
            let km = self.min_km * (self.max_km / self.min_km).powf(u);
            let bearing = rng.gen_range(170.0..350.0);
            let month = (i % 12) as u8 + 1;
            let id = format!("demo{:03}", i + 1);
            let out: RouteProfile<T> = synth_route(&id, km, bearing, month, self.spacing_m, &mut rng)?;
            let route = if i % 2 == 1 { out.reversed(id.clone())? } else { out };
            city_temps.push(city_table(&id, month, self, &mut rng)?);
            routes.push(Arc::new(route));
        }
        Ok(DemoDataset { routes, city_temps })
    }
}

/// Weather trace around a representative temperature: a gentle drift of up
/// to 1.5 K along the route and a steady random wind.
pub fn weather_trace<T: Scalar>(
    route: &RouteProfile<T>,
    day_type: DayType,
    base_k: f64,
    seed: u64,
) -> Result<WeatherTrace<T>> {
    let mut rng = stream(seed, 5_000);
    // two decimals keep the written files small
    let r2 = |x: f64| (x * 100.0).round() / 100.0;
    let drift = rng.gen_range(-1.5..1.5);
    let wind = r2(rng.gen_range(0.0..5.0));
    let dir = r2(rng.gen_range(0.0..360.0));
    let length = route.length().as_f64();
    let s0 = route.start_s().as_f64();
    let samples = route
        .points
        .iter()
        .map(|p| WeatherSample {
            t_amb_k: T::lit(r2(base_k + drift * (p.s.as_f64() - s0) / length)),
            rho_a: None,
            wind_speed: T::lit(wind),
            wind_dir_deg: T::lit(dir),
        })
        .collect();
    WeatherTrace::new(day_type, format!("{}-{}", route.id, day_type), samples)
}

/// Still air at one temperature along the whole route.
pub fn uniform_weather<T: Scalar>(route: &RouteProfile<T>, day_type: DayType, t_c: f64) -> Result<WeatherTrace<T>> {
    WeatherTrace::uniform(day_type, route.points.len(), WeatherSample::still(celsius_to_kelvin(T::lit(t_c))))
}

impl<T: Scalar> DemoDataset<T> {
    /// Cold, nominal and hot traces for route `i`, from its city table.
    pub fn day_type_weather(&self, i: usize) -> Result<Vec<(DayType, Arc<WeatherTrace<T>>)>> {
        let table = &self.city_temps[i];
        let sel = table.select_day_types()?;
        let reps = table.representatives()?;
        let route = &self.routes[i];
        [(DayType::Cold, sel.cold), (DayType::Nominal, sel.nominal), (DayType::Hot, sel.hot)]
            .into_iter()
            .map(|(dt, day)| {
                let seed = (i as u64) << 8 | day as u64;
                Ok((dt, Arc::new(weather_trace(route, dt, reps[day - 1].as_f64(), seed)?)))
            })
            .collect()
    }

    /// One scenario per route at a fixed temperature and mass.
    pub fn scenarios_at(&self, t_c: f64, mass_kg: f64, configuration: TruckConfiguration) -> Result<Vec<Scenario<T>>> {
        self.routes
            .iter()
            .map(|r| {
                let day_type = if t_c < 5.0 { DayType::Cold } else { DayType::Nominal };
                let w = Arc::new(uniform_weather(r, day_type, t_c)?);
                Scenario::new(r.clone(), w, T::lit(mass_kg), configuration)
            })
            .collect()
    }

    /// Writes `routes/<id>.csv`, `city_temperatures.csv` and
    /// `weather/<id>-<daytype>.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let routes_dir = dir.join("routes");
        let weather_dir = dir.join("weather");
        for d in [&routes_dir, &weather_dir] {
            std::fs::create_dir_all(d).map_err(|e| SimError::io(d, e))?;
        }
        for (i, r) in self.routes.iter().enumerate() {
            let p = routes_dir.join(format!("{}.csv", r.id));
            std::fs::write(&p, r.to_csv()).map_err(|e| SimError::io(&p, e))?;
            for (dt, w) in self.day_type_weather(i)? {
                let p = weather_dir.join(format!("{}-{}.json", r.id, dt));
                let json = serde_json::to_string(&*w).map_err(|e| SimError::parse("weather json", e))?;
                std::fs::write(&p, json).map_err(|e| SimError::io(&p, e))?;
            }
        }
        let mut csv = String::from("route_id,day,city,T_K\n");
        for t in &self.city_temps {
            for (d, row) in t.days.iter().zip(&t.temps) {
                for (c, v) in t.cities.iter().zip(row) {
                    csv.push_str(&format!("{},{},{},{}\n", t.route_id, d, c, v));
                }
            }
        }
        let p = dir.join("city_temperatures.csv");
        std::fs::write(&p, csv).map_err(|e| SimError::io(&p, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let spec = DemoSpec { n_routes: 4, ..DemoSpec::default() };
        let a = spec.generate::<f64>().unwrap();
        let b = spec.generate::<f64>().unwrap();
        for (x, y) in a.routes.iter().zip(&b.routes) {
            assert_eq!(x.points, y.points);
        }
        assert_eq!(a.city_temps, b.city_temps);
    }

    #[test]
    fn lengths_within_bounds() {
        let spec = DemoSpec { n_routes: 12, ..DemoSpec::default() };
        let d = spec.generate::<f64>().unwrap();
        for r in &d.routes {
            let km = r.length() / 1000.0;
            assert!(km >= spec.min_km - 1e-9 && km <= spec.max_km + 1e-9, "{km}");
            assert!(r.grades().iter().all(|g| g.abs() < 0.05));
        }
    }

    #[test]
    fn hill_pair_net_elevation() {
        let (up, down) = hill_pair::<f64>(40.0, 200.0, 1).unwrap();
        assert!((up.net_elevation_change() - 200.0).abs() < 1e-6);
        assert!((down.net_elevation_change() + 200.0).abs() < 1e-6);
    }

    #[test]
    fn day_types_ordered() {
        let d = DemoSpec { n_routes: 2, ..DemoSpec::default() }.generate::<f64>().unwrap();
        let w = d.day_type_weather(0).unwrap();
        assert!(w[0].1.mean_temperature_k() < w[1].1.mean_temperature_k());
        assert!(w[1].1.mean_temperature_k() < w[2].1.mean_temperature_k());
    }
}
