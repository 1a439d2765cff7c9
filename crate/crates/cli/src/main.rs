use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use drayage_sim::analysis::{
    monthly_consumption, run_batch, seasonal_aggregate, sensitivity, simulate_itineraries, BatchJob, Factor, Grouping,
    RunSample, SensitivitySpec,
};
use drayage_sim::demo::{uniform_weather, DemoSpec};
use drayage_sim::roadload::TruckConfiguration;
use drayage_sim::scenario::{
    build_yearly_itineraries, group_routes, load_city_temperatures, CargoOption, DayType, RouteProfile, Scenario,
    WeatherTrace, MONTHLY_TARGET_KM,
};
use drayage_sim::sim::{performance_characterize, run, PerfConditions, SimConfig};
use drayage_sim::{SimError, Vehicle};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "drayage", version, about = "Route-resolved energy simulation of diesel and electric drayage trucks")]
struct Cli {
    /// Log level filter (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Common {
    /// Vehicle JSON file, or the built-in `diesel` / `electric`.
    #[arg(long, default_value = "electric")]
    vehicle: String,
    /// Output directory; tables go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integration step, s.
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Worker threads, 0 for all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Clone)]
struct Load {
    /// Gross mass, kg.
    #[arg(long, default_value_t = 27_200.0)]
    mass: f64,
    #[arg(long, default_value = "tractor_trailer")]
    configuration: TruckConfiguration,
    /// Still-air ambient, degC, for routes without a weather file.
    #[arg(long, default_value_t = 20.0)]
    temp_c: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one route.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        load: Load,
        #[arg(long)]
        route: PathBuf,
        #[arg(long)]
        weather: Option<PathBuf>,
        /// Also write the per-step trace CSV.
        #[arg(long)]
        trace: bool,
    },
    /// Simulate every route (and weather file) of a dataset directory.
    Batch {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        load: Load,
        /// Dataset directory with routes/ and optionally weather/.
        #[arg(long)]
        data: PathBuf,
        /// Additional vehicles run over the same scenarios.
        #[arg(long = "also")]
        also: Vec<String>,
    },
    /// One-at-a-time +/- perturbation sweep.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        load: Load,
        #[arg(long)]
        data: PathBuf,
        /// Use only the first N routes.
        #[arg(long)]
        routes: Option<usize>,
        /// Comma-separated factor names; all when absent.
        #[arg(long, value_delimiter = ',')]
        factors: Vec<String>,
        #[arg(long, default_value_t = 0.1)]
        perturbation: f64,
    },
    /// Cold, nominal and hot days per route from city temperatures.
    Daytypes {
        #[command(flatten)]
        common: Common,
        /// CSV of route_id, day, city, T_K.
        #[arg(long)]
        temps: PathBuf,
    },
    /// Cluster routes by their far endpoint.
    Group {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 15)]
        k: usize,
    },
    /// Monthly itineraries and their fuel / electricity totals.
    Itinerary {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1)]
        trucks: usize,
        #[arg(long, default_value_t = MONTHLY_TARGET_KM)]
        target_km: f64,
        /// Cargo masses to sample from, kg.
        #[arg(long, value_delimiter = ',', default_value = "15000,22000,27200,33000")]
        masses: Vec<f64>,
        /// Only list the itineraries.
        #[arg(long)]
        no_simulate: bool,
    },
    /// Statistics of batch results per group, month, day type, band, direction.
    Aggregate {
        #[command(flatten)]
        common: Common,
        /// `samples.json` written by `batch`.
        #[arg(long)]
        input: PathBuf,
        /// `groups.csv` written by `group`.
        #[arg(long)]
        groups: Option<PathBuf>,
        /// Dimensions to split by.
        #[arg(long, value_delimiter = ',', default_value = "group,month,day_type,distance_band,direction")]
        by: Vec<String>,
    },
    /// Maximum speed, acceleration, gradeability and startability.
    Perf {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 27_200.0)]
        mass: f64,
        #[arg(long, default_value_t = 25.0)]
        temp_c: f64,
    },
    /// Write the synthetic demo dataset and vehicle files.
    Demo {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 60)]
        routes: usize,
    },
}

/// Carries the process exit code for outcomes that are not plain errors.
#[derive(Debug)]
struct PartialFailure(usize);

impl std::fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} run(s) failed", self.0)
    }
}

impl std::error::Error for PartialFailure {}

fn load_vehicle(spec: &str) -> Result<Vehicle> {
    Ok(match spec {
        "diesel" => Vehicle::default_diesel(),
        "electric" => Vehicle::default_electric(),
        path => Vehicle::load(path)?,
    })
}

fn sim_config(common: &Common) -> Result<SimConfig<f64>> {
    let cfg = SimConfig::default().with_dt(common.dt);
    cfg.validate()?;
    Ok(cfg)
}

fn emit(common: &Common, name: &str, csv: String, json: String) -> Result<()> {
    let (text, ext) = match common.format {
        Format::Csv => (csv, "csv"),
        Format::Json => (json, "json"),
    };
    match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let p = dir.join(format!("{name}.{ext}"));
            std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
            log::info!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn to_json<S: Serialize>(x: &S) -> Result<String> {
    Ok(serde_json::to_string_pretty(x)?)
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| SimError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

fn load_routes(data: &Path) -> Result<Vec<Arc<RouteProfile<f64>>>> {
    let dir = data.join("routes");
    let dir = if dir.is_dir() { dir } else { data.to_path_buf() };
    let routes: Vec<_> = sorted_files(&dir)?
        .into_iter()
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "json")))
        .map(|p| RouteProfile::load(&p).map(Arc::new))
        .collect::<Result<_, _>>()?;
    if routes.is_empty() {
        return Err(SimError::Empty(format!("no routes under {}", dir.display())).into());
    }
    Ok(routes)
}

/// Weather traces in `data/weather` named `<route id>-<suffix>.json`.
fn load_weather(data: &Path, routes: &[Arc<RouteProfile<f64>>]) -> Result<Vec<Vec<Arc<WeatherTrace<f64>>>>> {
    let dir = data.join("weather");
    let files = if dir.is_dir() { sorted_files(&dir)? } else { Vec::new() };
    routes
        .iter()
        .map(|r| {
            let prefix = format!("{}-", r.id);
            files
                .iter()
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with(&prefix) && n.ends_with(".json"))
                })
                .map(|p| Ok(Arc::new(WeatherTrace::load(p)?)))
                .collect()
        })
        .collect()
}

fn dataset_scenarios(data: &Path, load: &Load) -> Result<Vec<Scenario<f64>>> {
    let routes = load_routes(data)?;
    let weather = load_weather(data, &routes)?;
    let mut out = Vec::new();
    for (r, ws) in routes.iter().zip(weather) {
        if ws.is_empty() {
            let day_type = if load.temp_c < 5.0 { DayType::Cold } else { DayType::Nominal };
            let w = Arc::new(uniform_weather(r, day_type, load.temp_c)?);
            out.push(Scenario::new(r.clone(), w, load.mass, load.configuration)?);
        }
        for w in ws {
            out.push(Scenario::new(r.clone(), w, load.mass, load.configuration)?);
        }
    }
    Ok(out)
}

fn simulate(common: &Common, load: &Load, route: &Path, weather: Option<&Path>, trace: bool) -> Result<()> {
    let vehicle = load_vehicle(&common.vehicle)?;
    let mut cfg = sim_config(common)?;
    cfg.keep_records = trace;
    let r = Arc::new(RouteProfile::load(route)?);
    let w = match weather {
        Some(p) => WeatherTrace::load(p)?,
        None => uniform_weather(&r, DayType::Nominal, load.temp_c)?,
    };
    let sc = Scenario::new(r, Arc::new(w), load.mass, load.configuration)?;
    let result = run(&sc, &vehicle, &vehicle.driver, &cfg)?;
    let m = result.metrics()?;
    let json = result.summary_json()?;
    match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{}.json", sc.id)), &json)?;
            if trace {
                std::fs::write(dir.join(format!("{}.trace.csv", sc.id)), result.trace_csv())?;
            }
        }
        None if common.format == Format::Json => println!("{json}"),
        None => {}
    }
    if common.out.is_some() || common.format == Format::Csv {
        println!(
            "{} {:?} {:.2} km, {:.3} {} /100 km, regen {:.2} kWh",
            sc.id,
            result.status,
            m.distance_km,
            m.primary,
            if m.fuel_l_per_100km.is_some() { "L" } else { "kWh" },
            m.regen_kwh
        );
    }
    if !result.status.is_success() {
        return Err(PartialFailure(1).into());
    }
    Ok(())
}

fn batch(common: &Common, load: &Load, data: &Path, also: &[String]) -> Result<()> {
    let scenarios = dataset_scenarios(data, load)?;
    let mut vehicles = vec![load_vehicle(&common.vehicle)?];
    for v in also {
        vehicles.push(load_vehicle(v)?);
    }
    let job = BatchJob { scenarios, vehicles, sim: sim_config(common)?, jobs: common.jobs };
    let out = run_batch(&job)?;
    let samples = RunSample::from_batch(&out)?;
    match &common.out {
        Some(dir) => {
            out.write(dir)?;
            std::fs::write(dir.join("samples.json"), to_json(&samples)?)?;
        }
        None => print!("{}", out.summary_csv()),
    }
    eprintln!("{} runs, {} failed", out.records.len(), out.failures());
    match out.failures() {
        0 => Ok(()),
        n => Err(PartialFailure(n).into()),
    }
}

fn run_sensitivity(
    common: &Common,
    load: &Load,
    data: &Path,
    routes: Option<usize>,
    factors: &[String],
    perturbation: f64,
) -> Result<()> {
    let vehicle = load_vehicle(&common.vehicle)?;
    let mut scenarios = dataset_scenarios(data, load)?;
    if let Some(n) = routes {
        let keep: Vec<String> = {
            let mut ids: Vec<String> = scenarios.iter().map(|s| s.route.id.clone()).collect();
            ids.dedup();
            ids.into_iter().take(n).collect()
        };
        scenarios.retain(|s| keep.contains(&s.route.id));
    }
    let factors = if factors.is_empty() {
        Factor::ALL.to_vec()
    } else {
        factors.iter().map(|f| f.parse()).collect::<Result<_, _>>()?
    };
    let spec = SensitivitySpec { factors, perturbation };
    let table = sensitivity(&spec, &scenarios, &vehicle, &sim_config(common)?, common.jobs)?;
    emit(common, "sensitivity", table.to_csv(), to_json(&table)?)
}

fn daytypes(common: &Common, temps: &Path) -> Result<()> {
    let tables = load_city_temperatures::<f64>(temps)?;
    let mut csv = String::from("route_id,cold_day,nominal_day,hot_day,cold_k,nominal_k,hot_k\n");
    let mut rows = Vec::new();
    for t in &tables {
        let sel = t.select_day_types()?;
        let reps = t.representatives()?;
        let day = |i: usize| t.days[i - 1];
        csv.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{:.3}\n",
            t.route_id,
            day(sel.cold),
            day(sel.nominal),
            day(sel.hot),
            reps[sel.cold - 1],
            reps[sel.nominal - 1],
            reps[sel.hot - 1]
        ));
        rows.push(serde_json::json!({
            "route_id": t.route_id,
            "cold_day": day(sel.cold),
            "nominal_day": day(sel.nominal),
            "hot_day": day(sel.hot),
            "representative_k": reps,
        }));
    }
    emit(common, "daytypes", csv, to_json(&rows)?)
}

fn group(common: &Common, data: &Path, k: usize) -> Result<()> {
    let routes: Vec<RouteProfile<f64>> = load_routes(data)?.iter().map(|r| (**r).clone()).collect();
    let a = group_routes(&routes, k, common.seed)?;
    let mut csv = String::from("route_id,direction,group\n");
    for (r, g) in routes.iter().zip(&a.groups) {
        csv.push_str(&format!("{},{},{}\n", r.id, r.direction, g));
    }
    emit(common, "groups", csv, to_json(&a)?)
}

fn read_groups(path: &Path) -> Result<BTreeMap<String, usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let (Some(id), Some(g)) = (cols.first(), cols.last()) else { continue };
        let g = g.trim().parse().map_err(|e| SimError::Record { record: i + 1, message: format!("group: {e}") })?;
        out.insert(id.trim().to_string(), g);
    }
    Ok(out)
}

fn aggregate(common: &Common, input: &Path, groups: Option<&Path>, by: &[String]) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| SimError::io(input, e))?;
    let samples: Vec<RunSample> =
        serde_json::from_str(&text).map_err(|e| SimError::parse(input.display().to_string(), e))?;
    let mut grouping = Grouping { group: false, month: false, day_type: false, distance_band: false, direction: false };
    for d in by {
        match d.trim() {
            "group" => grouping.group = true,
            "month" => grouping.month = true,
            "day_type" => grouping.day_type = true,
            "distance_band" => grouping.distance_band = true,
            "direction" => grouping.direction = true,
            "" => {}
            other => return Err(SimError::invalid("aggregate dimension", format!("`{other}`")).into()),
        }
    }
    let groups = groups.map(read_groups).transpose()?.unwrap_or_default();
    let report = seasonal_aggregate(&samples, grouping, &groups);
    emit(common, "aggregate", report.to_csv(), report.to_json()?)
}

fn itinerary(
    common: &Common,
    data: &Path,
    trucks: usize,
    target_km: f64,
    masses: &[f64],
    no_simulate: bool,
) -> Result<()> {
    if trucks == 0 {
        return Err(SimError::invalid("trucks", "must be >= 1").into());
    }
    let vehicle = load_vehicle(&common.vehicle)?;
    let routes = load_routes(data)?;
    let mut weather = load_weather(data, &routes)?;
    for (r, ws) in routes.iter().zip(weather.iter_mut()) {
        if ws.is_empty() {
            ws.push(Arc::new(uniform_weather(r, DayType::Nominal, 20.0)?));
        }
    }
    let cargo: Vec<CargoOption<f64>> =
        masses.iter().map(|&m| CargoOption { mass_kg: m, configuration: TruckConfiguration::TractorTrailer }).collect();
    let cfg = sim_config(common)?;
    let mut listing = String::from("truck,month,trip,scenario_id,distance_km\n");
    let mut trips = Vec::new();
    for t in 0..trucks {
        let truck = format!("truck{:02}", t + 1);
        let seed = common.seed.wrapping_add(t as u64);
        let its = build_yearly_itineraries(&routes, &cargo, &weather, &vehicle.envelope(), target_km, seed)?;
        for it in &its {
            for (k, s) in it.scenarios.iter().enumerate() {
                listing.push_str(&format!(
                    "{truck},{},{},{},{:.3}\n",
                    it.month,
                    k + 1,
                    s.id,
                    s.route.length() / 1000.0
                ));
            }
        }
        if !no_simulate {
            trips.extend(simulate_itineraries(&truck, &its, &vehicle, &cfg, common.jobs)?);
        }
    }
    if no_simulate {
        let json = to_json(&listing.lines().collect::<Vec<_>>())?;
        return emit(common, "itinerary", listing, json);
    }
    let report = monthly_consumption(&trips)?;
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("itinerary.csv"), &listing)?;
    }
    emit(common, "monthly", report.to_csv(), to_json(&report)?)
}

fn perf(common: &Common, mass: f64, temp_c: f64) -> Result<()> {
    let vehicle = load_vehicle(&common.vehicle)?;
    let cond = PerfConditions { mass_kg: mass, ambient_k: temp_c + 273.15, ..PerfConditions::default() };
    let r = performance_characterize(&vehicle, &cond)?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.2}")).unwrap_or_default();
    let mut csv = String::from("metric,value,unit\n");
    csv.push_str(&format!("max_speed,{:.2},km/h\n", r.max_speed_kmh));
    csv.push_str(&format!("t_0_48,{},s\n", opt(r.t_0_48_s)));
    csv.push_str(&format!("t_48_80,{},s\n", opt(r.t_48_80_s)));
    csv.push_str(&format!("t_80_96,{},s\n", opt(r.t_80_96_s)));
    for (g, v) in &r.gradeability_kmh {
        csv.push_str(&format!("gradeability_{g}pct,{v:.2},km/h\n"));
    }
    csv.push_str(&format!("startability_continuous,{:.2},%\n", r.startability.continuous_pct));
    if let Some(p) = r.startability.peak_pct {
        csv.push_str(&format!("startability_peak,{p:.2},%\n"));
    }
    emit(common, "perf", csv, to_json(&r)?)
}

fn demo(common: &Common, routes: usize) -> Result<()> {
    let Some(dir) = &common.out else { bail!(SimError::invalid("demo", "--out is required")) };
    let spec = DemoSpec { seed: common.seed, n_routes: routes, ..DemoSpec::default() };
    spec.generate::<f64>()?.write(dir)?;
    let vdir = dir.join("vehicles");
    Vehicle::default_diesel().write_bundle(&vdir, "diesel")?;
    Vehicle::default_electric().write_bundle(&vdir, "electric")?;
    println!("demo dataset with {routes} routes written to {}", dir.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { common, load, route, weather, trace } => {
            simulate(common, load, route, weather.as_deref(), *trace)
        }
        Command::Batch { common, load, data, also } => batch(common, load, data, also),
        Command::Sensitivity { common, load, data, routes, factors, perturbation } => {
            run_sensitivity(common, load, data, *routes, factors, *perturbation)
        }
        Command::Daytypes { common, temps } => daytypes(common, temps),
        Command::Group { common, data, k } => group(common, data, *k),
        Command::Itinerary { common, data, trucks, target_km, masses, no_simulate } => {
            itinerary(common, data, *trucks, *target_km, masses, *no_simulate)
        }
        Command::Aggregate { common, input, groups, by } => aggregate(common, input, groups.as_deref(), by),
        Command::Perf { common, mass, temp_c } => perf(common, *mass, *temp_c),
        Command::Demo { common, routes } => demo(common, *routes),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<PartialFailure>().is_some() {
        return 3;
    }
    match err.downcast_ref::<SimError>() {
        Some(e) if e.is_validation() => 2,
        Some(SimError::Io { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
