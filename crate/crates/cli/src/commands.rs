//! One function per subcommand. Each reads its keys, rejects leftovers,
//! runs, and writes its artifacts plus `manifest.txt` under the output
//! directory.

use std::fs;
use std::path::{Path, PathBuf};

use mdla_lab::analysis::{chaos_diagnostics, example58_harness, growth_check, tagged_law_test, ChaosConfig, TaggedConfig, TestFunction};
use mdla_lab::engine::{Dynamics, PathPolicy};
use mdla_lab::lattice::{Boundary, Connectivity, LatticeSpec, Point, Site};
use mdla_lab::mdla::{figure2_config, run, MdlaConfig, MdlaRun, SeedGeometry};
use mdla_lab::output::{figure2_manifest, log_csv, pgm_snapshot, run_manifest, Manifest};
use mdla_lab::particles::{DensityProfile, InitialLaw};
use mdla_lab::stefan::{solve, weak_basket, weak_form_residual, Backend, InitialDensity};
use mdla_lab::winding::{
    crossing_csv, crossing_experiment, enclosure_check, first_enclosing_time, winding_number, CrossingConfig, Polyline,
};
use mdla_lab::Error;

use crate::config::{parse_list, Config};

pub struct Ctx {
    pub command: &'static str,
    pub cfg: Config,
    pub seed: u64,
    pub out: PathBuf,
}

type Res<T> = Result<T, Error>;

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Ctx {
    fn write(&self, name: &str, contents: &str) -> Res<()> {
        fs::create_dir_all(&self.out)?;
        fs::write(self.out.join(name), contents)?;
        Ok(())
    }

    /// Header (command, seed, config hash, resolved config) followed by the
    /// command's own entries.
    fn manifest(&self, body: &Manifest) -> Res<()> {
        let mut m = Manifest::new();
        m.set("command", self.command).set("seed", self.seed).set("config_hash", self.cfg.hash(self.command, self.seed));
        for (k, v) in self.cfg.resolved() {
            m.set(format!("config.{k}"), v);
        }
        for (k, v) in body.entries() {
            m.set(k.clone(), v);
        }
        self.write("manifest.txt", &m.render())
    }
}

fn sites(key: &str, text: &str, dim: usize) -> Res<Vec<Site>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let c: Vec<i32> = parse_list(key, s)?;
            if c.len() != dim {
                return Err(bad(format!("{key}: site '{s}' needs {dim} coordinates")));
            }
            Ok(Site::new(&c))
        })
        .collect()
}

fn site(cfg: &mut Config, key: &str, default: &str, dim: usize) -> Res<Site> {
    let text = cfg.text(key, default);
    sites(key, &text, dim)?.pop().ok_or_else(|| bad(format!("{key}: empty site")))
}

fn point(cfg: &mut Config, key: &str, default: &str, dim: usize) -> Res<Point> {
    let v: Vec<f64> = cfg.list(key, default)?;
    if v.len() != dim {
        return Err(bad(format!("{key}: need {dim} coordinates")));
    }
    let mut p = [0.0; 3];
    p[..dim].copy_from_slice(&v);
    Ok(p)
}

fn lattice(cfg: &mut Config) -> Res<LatticeSpec> {
    let dim: usize = cfg.get("lattice.dim", 2)?;
    let n: u32 = cfg.get("lattice.n", 32)?;
    match cfg.text("lattice.domain", "box").as_str() {
        "box" => {
            let side: i32 = cfg.get("lattice.side", n as i32)?;
            let boundary = match cfg.text("lattice.boundary", "reflecting").as_str() {
                "reflecting" => Boundary::Reflecting,
                "open" => Boundary::Open,
                other => return Err(bad(format!("lattice.boundary: unknown '{other}'"))),
            };
            let lo = Site::new(&vec![0; dim]);
            let hi = Site::new(&vec![side - 1; dim]);
            LatticeSpec::with_box(dim, n, lo, hi, boundary)
        }
        "unbounded" => LatticeSpec::new(dim, n),
        other => Err(bad(format!("lattice.domain: unknown '{other}'"))),
    }
}

fn seed_geometry(cfg: &mut Config, spec: &LatticeSpec) -> Res<SeedGeometry> {
    let dim = spec.dim;
    let mid = match spec.domain {
        mdla_lab::lattice::Domain::Box { hi, .. } => hi.0[0] / 2,
        mdla_lab::lattice::Domain::Unbounded => 0,
    };
    let centre = vec![mid.to_string(); dim].join(",");
    Ok(match cfg.text("seed.kind", "cubes").as_str() {
        "half_space" => SeedGeometry::HalfSpace { axis: cfg.get("seed.axis", 0)?, max: cfg.get("seed.max", 0)? },
        "box_complement" => SeedGeometry::BoxComplement {
            lo: site(cfg, "seed.lo", &vec!["0"; dim].join(","), dim)?,
            hi: site(cfg, "seed.hi", &centre, dim)?,
        },
        "ball" => SeedGeometry::Ball { center: point(cfg, "seed.center", &vec!["0.5"; dim].join(","), dim)?, radius: cfg.get("seed.radius", 0.1)? },
        "ball_complement" => SeedGeometry::BallComplement {
            center: point(cfg, "seed.center", &vec!["0.5"; dim].join(","), dim)?,
            radius: cfg.get("seed.radius", 0.4)?,
        },
        "cubes" => {
            let text = cfg.text("seed.sites", &centre);
            SeedGeometry::Cubes(sites("seed.sites", &text, dim)?)
        }
        other => return Err(bad(format!("seed.kind: unknown '{other}'"))),
    })
}

fn profile(cfg: &mut Config, dim: usize) -> Res<DensityProfile> {
    Ok(DensityProfile {
        height: cfg.get("particles.height", 0.5)?,
        lo: point(cfg, "particles.lo", &vec!["0"; dim].join(","), dim)?,
        hi: point(cfg, "particles.hi", &vec!["1"; dim].join(","), dim)?,
    })
}

fn initial_law(cfg: &mut Config, dim: usize) -> Res<InitialLaw> {
    Ok(match cfg.text("particles.law", "uniform").as_str() {
        "uniform" => InitialLaw::Uniform { count: cfg.get("particles.count", 100)? },
        "sites" => {
            let text = cfg.text("particles.sites", "");
            InitialLaw::Sites(sites("particles.sites", &text, dim)?)
        }
        "density" => InitialLaw::Density { profile: profile(cfg, dim)?, count: cfg.get("particles.count", 100)? },
        "bernoulli" => InitialLaw::Bernoulli { profile: profile(cfg, dim)? },
        other => return Err(bad(format!("particles.law: unknown '{other}'"))),
    })
}

fn write_run(ctx: &Ctx, out: &MdlaRun, mut manifest: Manifest) -> Res<()> {
    ctx.write("log.csv", &log_csv(out))?;
    let spec = &out.config.spec;
    if spec.dim == 2 && spec.is_bounded() {
        for (i, t) in out.config.snapshot_times.iter().enumerate() {
            ctx.write(&format!("snapshot_{i}.pgm"), &pgm_snapshot(&out.aggregate, *t)?)?;
            manifest.set(format!("snapshot_{i}.time"), t);
        }
    }
    if out.paths.policy == PathPolicy::Full {
        let mut buf = Vec::new();
        out.paths.write_csv(&mut buf)?;
        ctx.write("paths.csv", &String::from_utf8(buf).expect("ascii csv"))?;
    }
    ctx.manifest(&manifest)
}

pub fn mdla(ctx: &mut Ctx) -> Res<()> {
    let cfg = &mut ctx.cfg;
    let spec = lattice(cfg)?;
    let seed = seed_geometry(cfg, &spec)?;
    let law = initial_law(cfg, spec.dim)?;
    let horizon: f64 = cfg.get("horizon", 0.01)?;
    let mut rc = MdlaConfig::new(spec, seed, law, horizon);
    rc.exclude_adjacent = cfg.get("particles.exclude_adjacent", false)?;
    rc.connectivity = cfg.get("connectivity", Connectivity::ClosedCube)?;
    rc.snapshot_times = cfg.list("snapshots", &horizon.to_string())?;
    rc.path_policy = match cfg.text("paths", "auto").as_str() {
        "auto" => None,
        "full" => Some(PathPolicy::Full),
        "counts" => Some(PathPolicy::Counts),
        other => return Err(bad(format!("paths: unknown '{other}'"))),
    };
    let every: u64 = cfg.get("verify_every", 0)?;
    rc.verify_every = (every > 0).then_some(every);
    rc.min_component_diameter = cfg.optional("min_component_diameter")?;
    rc.stream = cfg.get("stream", 0)?;
    rc.rng_seed = ctx.seed;
    cfg.finish()?;
    let out = run(&rc)?;
    write_run(ctx, &out, run_manifest(&out))
}

/// `N:T`, e.g. `9900:0.01`.
pub fn parse_variant(s: &str) -> Res<(usize, f64)> {
    let (n, t) = s.split_once(':').ok_or_else(|| bad(format!("variant '{s}' is not N:T")))?;
    let n = n.trim().parse().map_err(|_| bad(format!("variant '{s}': bad N")))?;
    let t = t.trim().parse().map_err(|_| bad(format!("variant '{s}': bad T")))?;
    Ok((n, t))
}

pub fn figure2(ctx: &mut Ctx, variant: Option<&str>) -> Res<()> {
    let (count, horizon) = match variant {
        Some(v) => parse_variant(v)?,
        None => (ctx.cfg.get("figure2.particles", 9900usize)?, ctx.cfg.get("figure2.horizon", 0.01)?),
    };
    ctx.cfg.finish()?;
    let (rc, layout) = figure2_config(count, horizon, ctx.seed)?;
    let out = run(&rc)?;
    write_run(ctx, &out, figure2_manifest(&out, &layout))
}

fn density(text: &str) -> Res<InitialDensity> {
    let pieces = text
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let v: Vec<f64> = s.split(':').map(|x| x.trim().parse().map_err(|_| bad(format!("u0: bad piece '{s}'")))).collect::<Res<_>>()?;
            match v[..] {
                [a, b, h] => Ok((a, b, h)),
                _ => Err(bad(format!("u0: piece '{s}' is not a:b:height"))),
            }
        })
        .collect::<Res<Vec<_>>>()?;
    InitialDensity::new(pieces)
}

pub fn stefan1d(ctx: &mut Ctx) -> Res<()> {
    let cfg = &mut ctx.cfg;
    let u0 = density(&cfg.text("u0", "1:2:1"))?;
    let horizon: f64 = cfg.get("horizon", 0.25)?;
    let dt: f64 = cfg.get("dt", 0.001)?;
    let dx: f64 = cfg.get("dx", 0.005)?;
    let backend = match cfg.text("backend", "grid").as_str() {
        "grid" => Backend::Grid { dx },
        "mc" => Backend::MonteCarlo { particles: cfg.get("particles", 100_000)?, dx, seed: ctx.seed },
        other => return Err(bad(format!("backend: unknown '{other}'"))),
    };
    let every: usize = cfg.get("density_every", 0)?;
    let residuals: bool = cfg.get("residuals", true)?;
    cfg.finish()?;
    let sol = solve(&u0, horizon, dt, &backend)?;
    ctx.write("solution.csv", &sol.solution_csv())?;
    if every > 0 {
        ctx.write("density.csv", &sol.density_csv(every))?;
    }
    let mut m = Manifest::new();
    m.set("steps", sol.times.len() - 1).set("lambda_0", sol.lambda[0]).set("lambda_T", sol.final_lambda());
    m.set("jumps", sol.jumps.len()).set("surviving_mass_T", sol.surviving_mass(sol.times.len() - 1));
    if matches!(backend, Backend::MonteCarlo { .. }) {
        m.set("lambda_T_stderr", sol.stderr());
    }
    if residuals {
        let basket = weak_basket();
        let r = weak_form_residual(&sol, &basket)?;
        let mut csv = String::from("function,center,radius,power,omega,residual\n");
        for (i, (f, v)) in basket.iter().zip(&r).enumerate() {
            csv.push_str(&format!("{i},{},{},{},{},{v}\n", f.center, f.radius, f.power, f.omega));
        }
        ctx.write("residuals.csv", &csv)?;
        m.set("max_abs_residual", r.iter().fold(0.0f64, |a, b| a.max(b.abs())));
    }
    ctx.manifest(&m)
}

/// Polyline from a CSV with header `x,y` or `t,x,y`.
fn read_path(file: &Path) -> Res<Polyline> {
    let text = fs::read_to_string(file)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines.next().unwrap_or("").split(',').map(|s| s.trim().to_string()).collect();
    let timed = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["x", "y"] => false,
        ["t", "x", "y"] => true,
        _ => return Err(bad(format!("{}: header must be x,y or t,x,y", file.display()))),
    };
    let mut times = vec![];
    let mut points = vec![];
    for (i, l) in lines.enumerate() {
        let v: Vec<f64> = parse_list(&format!("{} row {}", file.display(), i + 1), l)?;
        match (timed, &v[..]) {
            (true, [t, x, y]) => {
                times.push(*t);
                points.push([*x, *y]);
            }
            (false, [x, y]) => points.push([*x, *y]),
            _ => return Err(bad(format!("{}: row {} has {} fields", file.display(), i + 1, v.len()))),
        }
    }
    if timed {
        Polyline::new(times, points)
    } else {
        Polyline::from_points(points)
    }
}

pub fn winding(ctx: &mut Ctx) -> Res<()> {
    let cfg = &mut ctx.cfg;
    let file = cfg.text("path", "");
    if file.is_empty() {
        return Err(bad("winding needs path = <csv file>"));
    }
    let z: Vec<f64> = cfg.list("point", "0,0")?;
    let [zx, zy] = z[..] else { return Err(bad("point: need x,y")) };
    let path = read_path(Path::new(&file))?;
    let t1: f64 = cfg.get("t1", path.start_time())?;
    let t2: f64 = cfg.get("t2", path.end_time())?;
    cfg.finish()?;
    let z = [zx, zy];
    let trace = winding_number(z, &path, t1, t2)?;
    let mut csv = String::from("index,time,increment,cumulative\n");
    let mut acc = 0.0;
    csv.push_str(&format!("0,{},0,0\n", trace.stopping_times[0]));
    for (i, (t, d)) in trace.stopping_times[1..].iter().zip(&trace.increments).enumerate() {
        acc += d;
        csv.push_str(&format!("{},{t},{d},{acc}\n", i + 1));
    }
    ctx.write("winding.csv", &csv)?;
    let mut m = Manifest::new();
    m.set("total", trace.total).set("turns", trace.turns()).set("stopping_times", trace.stopping_times.len());
    match first_enclosing_time(z, &path, t1, t2)? {
        Some(t) => m.set("first_enclosing_time", t),
        None => m.set("first_enclosing_time", "none"),
    };
    if path.is_closed() && t1 == path.start_time() && t2 == path.end_time() {
        m.set("enclosed", enclosure_check(z, &path)?);
    }
    ctx.manifest(&m)
}

pub fn crossing(ctx: &mut Ctx) -> Res<()> {
    let cfg = &mut ctx.cfg;
    let mut cc = CrossingConfig::new(cfg.get("delta", 1.0)?, cfg.list("delta_primes", "0.5,0.25,0.125,0.0625")?, cfg.get("paths", 2000)?);
    cc.resolution = cfg.get("resolution", cc.resolution)?;
    cc.seed = ctx.seed;
    cfg.finish()?;
    let rows = crossing_experiment(&cc)?;
    ctx.write("crossing.csv", &crossing_csv(&rows))?;
    let mut m = Manifest::new();
    m.set("step", cc.step());
    for r in &rows {
        m.set(format!("estimate.{}", r.delta_prime), r.estimate);
    }
    ctx.manifest(&m)
}

pub fn example58(ctx: &mut Ctx) -> Res<()> {
    let r: u32 = ctx.cfg.get("R", 3)?;
    let n: u32 = ctx.cfg.get("n", 50)?;
    ctx.cfg.finish()?;
    let (report, out) = example58_harness(r, n, ctx.seed)?;
    ctx.write("log.csv", &log_csv(&out))?;
    ctx.manifest(&report.to_manifest())
}

fn bump(cfg: &mut Config, prefix: &str, centre: &str, radius: f64) -> Res<TestFunction> {
    TestFunction::bump(point(cfg, &format!("{prefix}.center"), centre, 2)?, cfg.get(&format!("{prefix}.radius"), radius)?, cfg.get(&format!("{prefix}.height"), 1.0)?)
}

pub fn analyze(ctx: &mut Ctx) -> Res<()> {
    let cfg = &mut ctx.cfg;
    match cfg.text("task", "growth").as_str() {
        "growth" => {
            let n: u32 = cfg.get("growth.n", 64)?;
            let occupancy: f64 = cfg.get("growth.occupancy", 0.2)?;
            let horizon: f64 = cfg.get("growth.horizon", 0.02)?;
            let times: Vec<f64> = cfg.list("growth.times", "0,0.01,0.02")?;
            let phi = bump(cfg, "bump", "0.5,0.5", 0.35)?;
            cfg.finish()?;
            let m = n as i32;
            let spec = LatticeSpec::with_box(2, n, Site::d2(0, 0), Site::d2(m - 1, m - 1), Boundary::Reflecting)?;
            let count = ((m * m - 1) as f64 * occupancy).round() as usize;
            let mut rc = MdlaConfig::new(spec, SeedGeometry::Cubes(vec![Site::d2(m / 2, m / 2)]), InitialLaw::Uniform { count }, horizon);
            rc.rng_seed = ctx.seed;
            rc.path_policy = Some(PathPolicy::Counts);
            let out = run(&rc)?;
            let rows = growth_check(&out, &phi, &times)?;
            let mut csv = String::from("time,attached,cube_side,particle_side,bound\n");
            for r in &rows {
                csv.push_str(&format!("{},{},{},{},{}\n", r.time, r.attached, r.cube_side, r.particle_side, r.bound));
            }
            ctx.write("growth.csv", &csv)?;
            let mut man = Manifest::new();
            man.set("particles", count).set("within_bound", rows.iter().all(|r| r.gap().abs() <= r.bound));
            ctx.manifest(&man)
        }
        "chaos" => {
            let mut cc = ChaosConfig::new(cfg.list("chaos.ns", "16,32,64")?, cfg.get("chaos.replicas", 1000)?);
            cc.batches = cfg.get("chaos.batches", 20)?;
            cc.crowd_density = cfg.get("chaos.crowd_density", 0.5)?;
            cc.horizon = cfg.get("chaos.horizon", cc.horizon)?;
            let region: Vec<f64> = cfg.list("chaos.region", "0,0.5")?;
            let window: Vec<f64> = cfg.list("chaos.window", &format!("0,{}", cc.horizon))?;
            let (&[a, b], &[t1, t2]) = (&region[..], &window[..]) else { return Err(bad("chaos.region and chaos.window take two numbers")) };
            cc.region = (a, b);
            cc.window = (t1, t2);
            cc.dynamics = match cfg.text("chaos.dynamics", "bond").as_str() {
                "bond" => Dynamics::BondExclusion,
                "iid" => Dynamics::Independent,
                other => return Err(bad(format!("chaos.dynamics: unknown '{other}'"))),
            };
            cc.f = bump(cfg, "f", "0.25,0.25", 0.4)?;
            cc.seed = ctx.seed;
            cfg.finish()?;
            let rep = chaos_diagnostics(&cc)?;
            ctx.write("chaos.csv", &rep.csv())?;
            ctx.manifest(&rep.to_manifest())
        }
        "tagged" => {
            let mut tc = TaggedConfig::new(cfg.get("tagged.n", 32)?, cfg.get("tagged.horizon", 0.05)?, cfg.get("tagged.replicas", 10_000)?);
            tc.crowd_density = cfg.get("tagged.crowd_density", tc.crowd_density)?;
            tc.block = cfg.get("tagged.block", tc.block)?;
            tc.permutations = cfg.get("tagged.permutations", tc.permutations)?;
            tc.seed = ctx.seed;
            cfg.finish()?;
            let rep = tagged_law_test(&tc)?;
            if rep.low_replicas {
                eprintln!("warning: fewer than 1000 replicas; the permutation test is weak");
            }
            ctx.manifest(&rep.to_manifest())
        }
        other => Err(bad(format!("task: unknown '{other}' (growth, chaos, tagged)"))),
    }
}
