//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its measured numbers; the test fails if any criterion fails.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use drayage_sim::analysis::{run_batch, sensitivity, BatchJob, Factor, SensitivitySpec};
use drayage_sim::battery::{cell_step, BatteryState, CellParams, PackSpec};
use drayage_sim::demo::{hill_pair, synth_route, test_track, uniform_weather, DemoDataset, DemoSpec};
use drayage_sim::roadload::{tire_temperature_derivative, TireThermalParams, TruckConfiguration};
use drayage_sim::scalar::celsius_to_kelvin;
use drayage_sim::scenario::{DayType, RouteProfile, Scenario, WeatherSample, WeatherTrace};
use drayage_sim::sim::{performance_characterize, run, PerfConditions, SimConfig, SimResult};
use drayage_sim::vehicle::VehicleConfig;
use rand::SeedableRng;

type Outcome = (bool, String);
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

const TT: TruckConfiguration = TruckConfiguration::TractorTrailer;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn demo() -> DemoDataset<f64> {
    DemoSpec::default().generate().expect("demo dataset")
}

fn sim(sc: &Scenario<f64>, v: &VehicleConfig<f64>, dt: f64) -> SimResult<f64> {
    run(sc, v, &v.driver, &SimConfig::default().with_dt(dt)).expect("run")
}

fn still_air(route: &RouteProfile<f64>, t_c: f64, rho: Option<f64>, day: DayType) -> Arc<WeatherTrace<f64>> {
    let s = WeatherSample { rho_a: rho, ..WeatherSample::still(celsius_to_kelvin(t_c)) };
    Arc::new(WeatherTrace::uniform(day, route.points.len(), s).unwrap())
}

/// Fleet consumption: total energy over total distance, per 100 km.
fn fleet_per_100km(results: &[SimResult<f64>]) -> f64 {
    let km: f64 = results.iter().map(|r| r.totals.distance_km).sum();
    let e: f64 = results.iter().map(|r| r.metrics().unwrap().primary * r.totals.distance_km).sum();
    e / km
}

fn run_all(scenarios: &[Scenario<f64>], v: &VehicleConfig<f64>) -> Vec<SimResult<f64>> {
    let job = BatchJob::new(scenarios.to_vec(), v.clone());
    let out = run_batch(&job).unwrap();
    out.records
        .into_iter()
        .map(|r| {
            let res = r.outcome.expect("run succeeded");
            assert!(res.status.is_success(), "{} {:?}", res.scenario_id, res.status);
            res
        })
        .collect()
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target
}

fn c1_track_tests() -> Outcome {
    let t0 = Instant::now();
    let veh = VehicleConfig::default_diesel();
    let c = veh.driver.compliance;
    let fall_route = Arc::new(test_track("fall", 100.0, 105.0, c, 10).unwrap());
    let winter_route = Arc::new(test_track("winter", 90.0, 90.0, c, 1).unwrap());
    let fall =
        Scenario::new(fall_route.clone(), still_air(&fall_route, 15.4, Some(1.245), DayType::Nominal), 24_880.0, TT)
            .unwrap();
    let winter =
        Scenario::new(winter_route.clone(), still_air(&winter_route, -6.3, Some(1.337), DayType::Cold), 24_880.0, TT)
            .unwrap();
    let f = sim(&fall, &veh, 1.0).metrics().unwrap().fuel_l_per_100km.unwrap();
    let w = sim(&winter, &veh, 1.0).metrics().unwrap().fuel_l_per_100km.unwrap();
    let rise = 100.0 * (w / f - 1.0);
    let secs = t0.elapsed().as_secs_f64();
    let ok = within(f, 35.51, 0.05) && within(w, 35.90, 0.05) && (0.5..=5.0).contains(&rise) && secs < 10.0;
    (ok, format!("fall {f:.2} L/100km, winter {w:.2} L/100km, winter rise {rise:+.2}%, {secs:.2} s"))
}

fn c2_bev_band(data: &DemoDataset<f64>) -> Outcome {
    let veh = VehicleConfig::default_electric();
    let warm = fleet_per_100km(&run_all(&data.scenarios_at(20.0, 27_200.0, TT).unwrap(), &veh));
    let cold = fleet_per_100km(&run_all(&data.scenarios_at(-6.0, 27_200.0, TT).unwrap(), &veh));
    let rise = 100.0 * (cold / warm - 1.0);
    let ok = (120.0..=180.0).contains(&warm) && rise >= 5.0;
    (ok, format!("20 C {warm:.2} kWh/100km, -6 C {cold:.2} kWh/100km ({rise:+.1}%) over {} routes", data.routes.len()))
}

/// Flat tables so the RC branch has a single time constant.
fn flat_cell() -> CellParams<f64> {
    let mut c = CellParams::default_nmc21700();
    for t in [&mut c.r0, &mut c.r1, &mut c.c1] {
        let y = t.y[6];
        t.y.iter_mut().for_each(|v| *v = y);
    }
    c
}

fn c3_battery() -> Outcome {
    let pack = PackSpec::default_800kwh();
    // (a) Coulomb counting against the exact piecewise-constant integral
    let c = CellParams::<f64>::default_nmc21700();
    let mut s = BatteryState::at_rest(0.9, 298.15, &c, &pack);
    let pieces = [(7.5, 120), (-3.25, 45), (0.0, 30), (12.0, 200), (-6.0, 17)];
    let mut charge_as = 0.0;
    for (i, n) in pieces {
        for _ in 0..n {
            cell_step(&mut s, i, 0.5, &c).unwrap();
        }
        charge_as += i * 0.5 * n as f64;
    }
    let exact = 0.9 - charge_as / (3600.0 * c.q_nom_ah);
    let coulomb_err = (s.soc - exact).abs() / exact;

    // (b) RC transient at dt = 0.1 s
    let c = flat_cell();
    let (r1, tau) = (c.r1.y[0], c.r1.y[0] * c.c1.y[0]);
    let i = 5.0;
    let mut s = BatteryState::at_rest(0.7, 298.15, &c, &pack);
    let mut rc_err: f64 = 0.0;
    for k in 1..=(5.0 * tau / 0.1) as usize {
        cell_step(&mut s, i, 0.1, &c).unwrap();
        let t = k as f64 * 0.1;
        let exact = i * r1 * (1.0 - (-t / tau).exp());
        rc_err = rc_err.max((s.v_rc - exact).abs() / (i * r1));
    }

    // (c) thermal relaxation of a resting cell in fixed surroundings
    let c = CellParams::<f64>::default_nmc21700();
    let tau_th = c.r_th_k_w * c.heat_capacity_j_k;
    let (t_amb, t_start) = (273.15, 313.15);
    let (mut t, dt) = (t_start, 0.1);
    let mut th_err: f64 = 0.0;
    for k in 1..=(3.0 * tau_th / dt) as usize {
        t += dt * drayage_sim::battery::cell_temperature_derivative(0.0, t, t_amb, &c);
        let exact = t_amb + (t_start - t_amb) * (-(k as f64) * dt / tau_th).exp();
        th_err = th_err.max((t - exact).abs() / (t_start - t_amb));
    }

    // (d) reference trace
    let veh = VehicleConfig::<f64>::load(data_dir().join("vehicles/electric.json")).unwrap();
    let drayage_sim::vehicle::Powertrain::Electric { battery, .. } = &veh.powertrain else { unreachable!() };
    let text = std::fs::read_to_string(data_dir().join("reference/cell_trace.csv")).unwrap();
    let rows: Vec<(f64, f64, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (v[0], v[1], v[2])
        })
        .collect();
    let mut s = BatteryState::at_rest(0.9, 298.15, &battery.cell, &battery.pack);
    let mut sq = 0.0;
    for w in rows.windows(2) {
        let (t0, _, _) = w[0];
        let (t1, i, v_ref) = w[1];
        cell_step(&mut s, i, t1 - t0, &battery.cell).unwrap();
        sq += (s.v_cell - v_ref).powi(2);
    }
    let rmse_mv = 1000.0 * (sq / (rows.len() - 1) as f64).sqrt();

    let ok = coulomb_err <= 1e-12 && rc_err <= 1e-3 && th_err <= 1e-3 && rmse_mv <= 5.0;
    (
        ok,
        format!(
            "coulomb rel err {coulomb_err:.1e}, RC max err {:.3}%, thermal max err {:.3}%, trace RMSE {rmse_mv:.2} mV",
            100.0 * rc_err,
            100.0 * th_err
        ),
    )
}

fn c4_tire() -> Outcome {
    let p = TireThermalParams::<f64>::default_truck_tire();
    let exact = [233.15, 263.15, 273.15, 288.55, 303.15, 318.15].iter().all(|&a| p.stabilized_temperature(0.0, a) == a);
    let tau0 = p.time_constant(0.0);
    let (amb, dt) = (268.15, 1.0);
    let steps = (3.0 * tau0 / dt).ceil() as usize;
    let relax = |start: f64| {
        let mut t = start;
        for _ in 0..steps {
            t += dt * tire_temperature_derivative(t, 0.0, amb, &p);
        }
        t - amb
    };
    // a parked tire a few kelvin off ambient, e.g. after an overnight swing
    let near = [-9.0, 9.0].map(|d| relax(amb + d).abs()).into_iter().fold(0.0, f64::max);
    // from far off, what remains is the e^-3 fraction of the initial gap
    let far = [-35.0, 30.0, 75.0].map(|d| relax(amb + d) / d).into_iter().fold(0.0, f64::max);
    let ok = exact && near < 0.5 && far <= (-3.0f64).exp() * 1.01;
    (
        ok,
        format!("T_st(0) exact: {exact}; after 3 tau ({tau0:.0} s) a 9 K gap leaves {near:.3} K, larger gaps keep {:.2}% of the offset", 100.0 * far),
    )
}

fn aux_kwh(r: &SimResult<f64>, name: &str) -> f64 {
    r.totals.aux_kwh.iter().filter(|a| a.name == name).map(|a| a.kwh).sum()
}

fn c5_btms(data: &DemoDataset<f64>) -> Outcome {
    let veh = VehicleConfig::default_electric();
    let cold = run_all(&data.scenarios_at(-6.0, 27_200.0, TT).unwrap(), &veh);
    let total: f64 = cold.iter().map(|r| r.aux_total_kwh()).sum();
    let names: Vec<String> = cold[0].totals.aux_kwh.iter().map(|a| a.name.clone()).collect();
    let per: Vec<(String, f64)> = names.iter().map(|n| (n.clone(), cold.iter().map(|r| aux_kwh(r, n)).sum())).collect();
    let heater = per.iter().find(|p| p.0 == "btms_heater").map_or(0.0, |p| p.1);
    let largest = per.iter().all(|p| p.1 <= heater);
    let share = heater / total;

    // average total auxiliary power on a flat route at constant ambient
    let track = Arc::new(test_track("sweep", 30.0, 80.0, 1.0, 6).unwrap());
    let temps: Vec<f64> = (0..=20).map(|k| -10.0 + 2.5 * k as f64).collect();
    let power: Vec<f64> = temps
        .iter()
        .map(|&t| {
            let w = Arc::new(uniform_weather(&track, DayType::Nominal, t).unwrap());
            let r = sim(&Scenario::new(track.clone(), w, 27_200.0, TT).unwrap(), &veh, 1.0);
            r.aux_total_kwh() * 3.6e6 / r.totals.duration_s
        })
        .collect();
    let imin = (0..power.len()).min_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap();
    let descending = power[..=imin].windows(2).all(|w| w[1] <= w[0]);
    let ascending = power[imin..].windows(2).all(|w| w[1] >= w[0]);
    let t_min = temps[imin];
    let ok = largest && (0.40..=0.85).contains(&share) && descending && ascending && (15.0..=25.0).contains(&t_min);
    (
        ok,
        format!(
            "heater share {:.1}% (largest: {largest}); aux power minimum {:.2} kW at {t_min} C, unimodal: {}",
            100.0 * share,
            power[imin] / 1000.0,
            descending && ascending
        ),
    )
}

fn c6_sensitivity(data: &DemoDataset<f64>) -> Outcome {
    let t0 = Instant::now();
    let scenarios: Vec<Scenario<f64>> = (0..data.routes.len())
        .map(|i| {
            let (_, w) = data.day_type_weather(i).unwrap().into_iter().find(|(d, _)| *d == DayType::Nominal).unwrap();
            Scenario::new(data.routes[i].clone(), w, 27_200.0, TT).unwrap()
        })
        .collect();
    let spec = SensitivitySpec::default();
    let mut ok = scenarios.len() >= 50;
    let mut msg = Vec::new();
    for veh in [VehicleConfig::default_diesel(), VehicleConfig::default_electric()] {
        let table = sensitivity(&spec, &scenarios, &veh, &SimConfig::default(), 0).unwrap();
        let top = table.rows[0].factor;
        let signs_ok =
            [Factor::Mass, Factor::AirDensity, Factor::FrontalArea, Factor::DragCoefficient, Factor::RollingResistance]
                .iter()
                .all(|&f| {
                    let r = table.row(f).unwrap();
                    r.plus_pct > 0.0 && r.minus_pct < 0.0 && r.n == scenarios.len()
                });
        ok &= top == Factor::SpeedLimit && signs_ok;
        let second = &table.rows[1];
        msg.push(format!(
            "{}: top {} ({:.2}%), next {} ({:.2}%), signs ok: {signs_ok}",
            veh.kind(),
            top,
            table.rows[0].mean_abs_pct,
            second.factor,
            second.mean_abs_pct
        ));
    }
    let secs = t0.elapsed().as_secs_f64();
    ok &= secs < 900.0;
    (ok, format!("{} routes; {}; {secs:.1} s", scenarios.len(), msg.join("; ")))
}

fn c7_regen() -> Outcome {
    let (up, down) = hill_pair::<f64>(40.0, 200.0, 11).unwrap();
    let gap = |veh: &VehicleConfig<f64>| {
        let e = |r: &RouteProfile<f64>| {
            let r = Arc::new(r.clone());
            let w = uniform_weather(&r, DayType::Nominal, 20.0).unwrap();
            let sc = Scenario::new(r, Arc::new(w), 27_200.0, TT).unwrap();
            sim(&sc, veh, 1.0).metrics().unwrap().primary
        };
        let (eu, ed) = (e(&up), e(&down));
        (eu - ed) / (0.5 * (eu + ed))
    };
    let bev = gap(&VehicleConfig::default_electric());
    let ice = gap(&VehicleConfig::default_diesel());
    (bev > ice && ice > 0.0, format!("relative up/down gap: electric {:.1}%, diesel {:.1}%", 100.0 * bev, 100.0 * ice))
}

fn c8_perf() -> Outcome {
    let cond = PerfConditions::default();
    let d = performance_characterize(&VehicleConfig::default_diesel(), &cond).unwrap();
    let e = performance_characterize(&VehicleConfig::default_electric(), &cond).unwrap();
    let g6 = |r: &drayage_sim::sim::PerformanceReport<f64>| r.gradeability_kmh.iter().find(|g| g.0 == 6.0).unwrap().1;
    let ok = within(e.max_speed_kmh, 141.9, 0.1)
        && within(d.max_speed_kmh, 129.5, 0.1)
        && within(g6(&d), 60.2, 0.1)
        && within(g6(&e), 67.6, 0.1)
        && d.startability.continuous_pct >= 6.0
        && e.startability.continuous_pct >= 6.0;
    (
        ok,
        format!(
            "max speed electric {:.1} / diesel {:.1} km/h; 6% grade diesel {:.1} / electric {:.1} km/h; startability diesel {:.1}%, electric {:.1}% (peak {:.1}%)",
            e.max_speed_kmh,
            d.max_speed_kmh,
            g6(&d),
            g6(&e),
            d.startability.continuous_pct,
            e.startability.continuous_pct,
            e.startability.peak_pct.unwrap_or(f64::NAN)
        ),
    )
}

fn dir_hash(dir: &Path) -> u64 {
    let mut files: Vec<PathBuf> = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    files.sort();
    let mut h = DefaultHasher::new();
    for f in files {
        f.strip_prefix(dir).unwrap().hash(&mut h);
        std::fs::read(&f).unwrap().hash(&mut h);
    }
    h.finish()
}

fn c9_engineering(data: &DemoDataset<f64>) -> Outcome {
    let scenarios: Vec<Scenario<f64>> = data.scenarios_at(15.0, 27_200.0, TT).unwrap();
    let vehicles = vec![VehicleConfig::default_diesel(), VehicleConfig::default_electric()];
    let job = |jobs: usize, dt: f64| BatchJob {
        scenarios: scenarios.clone(),
        vehicles: vehicles.clone(),
        sim: SimConfig::default().with_dt(dt),
        jobs,
    };
    let hashes: Vec<u64> = [1, 3, 8]
        .iter()
        .map(|&j| {
            let tmp = tempfile::tempdir().unwrap();
            run_batch(&job(j, 1.0)).unwrap().write(tmp.path()).unwrap();
            dir_hash(tmp.path())
        })
        .collect();
    let deterministic = hashes.windows(2).all(|w| w[0] == w[1]);

    let coarse = run_batch(&job(0, 1.0)).unwrap();
    let fine = run_batch(&job(0, 0.5)).unwrap();
    let mut worst_closure: f64 = 0.0;
    let mut worst_dt: f64 = 0.0;
    let mut failures = coarse.failures() + fine.failures();
    for (a, b) in coarse.records.iter().zip(&fine.records) {
        let (Some(a), Some(b)) = (a.result(), b.result()) else {
            failures += 1;
            continue;
        };
        worst_closure = worst_closure.max(a.ledger.relative_residual()).max(b.ledger.relative_residual());
        let (ea, eb) = (a.ledger.source_j, b.ledger.source_j);
        worst_dt = worst_dt.max((ea - eb).abs() / eb.abs());
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(193);
    let long = Arc::new(synth_route::<f64>("long193", 193.0, 260.0, 6, 100.0, &mut rng).unwrap());
    let sc =
        Scenario::new(long.clone(), Arc::new(uniform_weather(&long, DayType::Nominal, 20.0).unwrap()), 27_200.0, TT)
            .unwrap();
    let mut slowest: f64 = 0.0;
    for veh in &vehicles {
        let t0 = Instant::now();
        let r = sim(&sc, veh, 1.0);
        slowest = slowest.max(t0.elapsed().as_secs_f64());
        assert!(r.status.is_success());
    }

    let ok = deterministic && failures == 0 && worst_closure < 0.005 && worst_dt < 0.005 && slowest < 2.0;
    (
        ok,
        format!(
            "hash-equal across jobs 1/3/8: {deterministic}; {} runs, {failures} failed; max ledger residual {:.2e}; max dt-halving change {:.3}%; 193 km route {slowest:.3} s",
            coarse.records.len(),
            worst_closure,
            100.0 * worst_dt
        ),
    )
}

fn main() {
    let data = demo();
    let criteria: Vec<(&str, Check)> = vec![
        ("1 diesel track tests", Box::new(c1_track_tests)),
        ("2 electric consumption band", Box::new(|| c2_bev_band(&data))),
        ("3 battery oracles", Box::new(c3_battery)),
        ("4 tire temperature", Box::new(c4_tire)),
        ("5 BTMS seasonal behaviour", Box::new(|| c5_btms(&data))),
        ("6 sensitivity ordering", Box::new(|| c6_sensitivity(&data))),
        ("7 regen asymmetry", Box::new(c7_regen)),
        ("8 performance figures", Box::new(c8_perf)),
        ("9 engineering properties", Box::new(|| c9_engineering(&data))),
    ];
    let mut failed = Vec::new();
    for (name, check) in &criteria {
        let (ok, detail) = check();
        println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(*name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
