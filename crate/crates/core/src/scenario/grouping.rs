use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::route::{great_circle_m, Direction, RouteProfile};
use crate::error::{Result, SimError};
use crate::scalar::Scalar;

pub const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn distance_m(&self, other: &GeoPoint) -> f64 {
        great_circle_m(self.lat, self.lon, other.lat, other.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    /// 1-based group per route, numbered by center distance from the port.
    pub groups: Vec<usize>,
    pub centers: Vec<GeoPoint>,
    pub port: GeoPoint,
}

impl GroupAssignment {
    pub fn members(&self, group: usize) -> Vec<usize> {
        (0..self.groups.len()).filter(|&i| self.groups[i] == group).collect()
    }
}

/// Outbound trips leave the port, so the far end is the last point.
fn endpoints<T: Scalar>(route: &RouteProfile<T>) -> (GeoPoint, GeoPoint) {
    let (a, b) = (route.first(), route.last());
    let a = GeoPoint { lat: a.lat.as_f64(), lon: a.lon.as_f64() };
    let b = GeoPoint { lat: b.lat.as_f64(), lon: b.lon.as_f64() };
    match route.direction {
        Direction::Outbound => (a, b),
        Direction::Inbound => (b, a),
    }
}

fn centroid(points: &[GeoPoint], members: impl Iterator<Item = usize>) -> Option<GeoPoint> {
    let (mut lat, mut lon, mut n) = (0.0, 0.0, 0usize);
    for i in members {
        lat += points[i].lat;
        lon += points[i].lon;
        n += 1;
    }
    (n > 0).then(|| GeoPoint { lat: lat / n as f64, lon: lon / n as f64 })
}

fn nearest(p: &GeoPoint, centers: &[GeoPoint]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = p.distance_m(c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations on great-circle distance.
pub fn kmeans(points: &[GeoPoint], k: usize, seed: u64) -> Result<(Vec<usize>, Vec<GeoPoint>)> {
    let n = points.len();
    if k == 0 {
        return Err(SimError::invalid("k", "must be at least 1"));
    }
    if k > n {
        return Err(SimError::invalid("k", format!("{k} groups requested for {n} routes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.gen_range(0..n)];
    while chosen.len() < k {
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                if chosen.contains(&i) {
                    return 0.0;
                }
                chosen.iter().map(|&c| points[i].distance_m(&points[c])).fold(f64::INFINITY, f64::min).powi(2)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 && r < *w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            while chosen.contains(&pick) {
                pick = (pick + n - 1) % n;
            }
            pick
        } else {
            // remaining points coincide with chosen centers
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
    }
    let mut centers: Vec<GeoPoint> = chosen.iter().map(|&i| points[i]).collect();
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..KMEANS_MAX_ITER {
        let own: Vec<f64> = (0..n).map(|i| points[i].distance_m(&centers[assign[i]])).collect();
        for (j, c) in centers.iter_mut().enumerate() {
            match centroid(points, (0..n).filter(|&i| assign[i] == j)) {
                Some(m) => *c = m,
                None => {
                    // re-seed an empty cluster at the worst-served point
                    let far = (0..n).max_by(|&a, &b| own[a].total_cmp(&own[b]).then(b.cmp(&a))).expect("n > 0");
                    *c = points[far];
                }
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    Ok((assign, centers))
}

pub fn group_routes<T: Scalar>(routes: &[RouteProfile<T>], k: usize, seed: u64) -> Result<GroupAssignment> {
    if routes.is_empty() {
        return Err(SimError::Empty("no routes to group".into()));
    }
    let ends: Vec<(GeoPoint, GeoPoint)> = routes.iter().map(endpoints).collect();
    let far: Vec<GeoPoint> = ends.iter().map(|e| e.1).collect();
    let port = centroid(&ends.iter().map(|e| e.0).collect::<Vec<_>>(), 0..ends.len()).expect("non-empty");
    let (assign, centers) = kmeans(&far, k, seed)?;

    let mut order: Vec<usize> = (0..centers.len()).collect();
    order.sort_by(|&a, &b| centers[a].distance_m(&port).total_cmp(&centers[b].distance_m(&port)).then(a.cmp(&b)));
    let mut rank = vec![0; centers.len()];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r + 1;
    }
    Ok(GroupAssignment {
        groups: assign.iter().map(|&c| rank[c]).collect(),
        centers: order.iter().map(|&c| centers[c]).collect(),
        port,
    })
}
