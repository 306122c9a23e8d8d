use std::path::Path;
use std::time::Instant;

use clap::{Args, ValueEnum};
use nestfus::analysis::{
    crossing_value, geometric_levels, reference_harmonics, write_records_csv, ConvergenceRecord,
    OnAxisProfile, QuadratureStudy, ShrinkLevel,
};
use nestfus::cascade::{run_cascade, CascadeConfig};
use nestfus::grid::{plan_nested_meshes, plan_single_mesh, plan_with_fractions, prefocal_length};
use nestfus::krylov::GmresOptions;
use nestfus::vie::{run_cascade_inhomogeneous, MediumMapSource};
use nestfus::{ApertureDisc, BowlTransducer, DomainBox, Medium, MeshPlan};

use crate::config::{Mode, RunConfig};
use crate::error::{config_err, CliError, CliResult};
use crate::output::{self, Manifest};

fn manifest(command: &str, cfg: &RunConfig, outputs: Vec<String>) -> Manifest {
    Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        threads: rayon::current_num_threads(),
        config: cfg.clone(),
        outputs,
        solves: Vec::new(),
    }
}

fn medium(cfg: &RunConfig) -> CliResult<Medium<f64>> {
    Medium::from_spec(&cfg.medium).map_err(config_err)
}

pub fn make_plan(cfg: &RunConfig, tr: &BowlTransducer<f64>, medium: &Medium<f64>) -> CliResult<MeshPlan<f64>> {
    let plan = match cfg.domain_fractions() {
        Some(fr) => plan_with_fractions(tr, medium, cfg.post_focal, cfg.n_w, &fr),
        None => plan_nested_meshes(tr, medium, cfg.post_focal, cfg.n_w, cfg.n_harmonics),
    };
    plan.map_err(config_err)
}

fn map_source(cfg: &RunConfig) -> CliResult<MediumMapSource<f64>> {
    match &cfg.medium_map {
        Some(m) => m.source(),
        None => Ok(MediumMapSource::Homogeneous),
    }
}

/// Runs the pipeline and writes every artefact into `cfg.out`.
pub fn simulate(cfg: &RunConfig) -> CliResult<()> {
    let tr = cfg.build_transducer()?;
    let medium = medium(cfg)?;
    let source = if cfg.mode == Mode::Vie { Some(map_source(cfg)?) } else { None };
    let plan = if cfg.n_harmonics >= 2 { Some(make_plan(cfg, &tr, &medium)?) } else { None };

    let out = &cfg.out;
    output::create_dir(out)?;
    let mut files = Vec::new();
    if let Some(plan) = &plan {
        output::write_text(&out.join("mesh_plan.txt"), &plan.report())?;
        files.push("mesh_plan.txt".to_string());
    }

    let t0 = Instant::now();
    let disc = ApertureDisc::for_transducer(&tr, cfg.disc_spacing);
    let incident = tr.incident_field(&medium, &disc)?;
    log::info!("incident field normalized in {:.2} s (scale {:.4e})", t0.elapsed().as_secs_f64(), incident.scale);

    let mut mf = manifest("simulate", cfg, Vec::new());
    let Some(plan) = plan else {
        let lambda = medium.wavelength(tr.f0, 1);
        let dx = lambda / cfg.n_w as f64;
        let x0 = tr.focal_length - prefocal_length(tr.focal_length, tr.outer_radius);
        let n = ((tr.focal_length + cfg.post_focal - x0) / dx).ceil() as usize + 1;
        let xs: Vec<f64> = (0..n).map(|i| x0 + i as f64 * dx).collect();
        let p1 = OnAxisProfile::from_incident(&incident, xs)?;
        output::write_axis_csv(&out.join(output::axis_csv_name(1)), &p1)?;
        files.push(output::axis_csv_name(1));
        output::write_text(&out.join("timings.txt"), &output::timing_rows(&[]))?;
        files.push("timings.txt".into());
        mf.outputs = files;
        output::write_manifest(out, &mf)?;
        println!("p1 on-axis peak {:.4e} Pa", p1.abs().into_iter().fold(0.0, f64::max));
        return Ok(());
    };

    let mut cc = CascadeConfig::new(medium, incident, plan);
    cc.n_harmonics = cfg.n_harmonics;
    cc.interpolation = cfg.interpolation;
    cc.fft_sizing = cfg.fft_sizing;
    cc.recompute_incident = cfg.recompute_incident;
    let result = match &source {
        None => run_cascade(&cc)?,
        Some(src) => {
            let opts = GmresOptions { tol: cfg.tol, max_iter: cfg.max_iter, ..Default::default() };
            run_cascade_inhomogeneous(&cc, src, opts)?
        }
    };

    if cfg.dump_fields {
        output::create_dir(&out.join("fields"))?;
    }
    for field in &result.fields {
        let n = field.harmonic();
        let profile = OnAxisProfile::from_field(field)?;
        output::write_axis_csv(&out.join(output::axis_csv_name(n)), &profile)?;
        files.push(output::axis_csv_name(n));
        println!("p{n}: on-axis peak {:.4e} Pa", profile.abs().into_iter().fold(0.0, f64::max));
        if cfg.dump_fields {
            for f in output::dump_field(&out.join("fields"), field)? {
                files.push(format!("fields/{f}"));
            }
        }
    }
    let table = output::timing_rows(&result.timings);
    output::write_text(&out.join("timings.txt"), &table)?;
    files.push("timings.txt".into());
    print!("{table}");
    mf.outputs = files;
    mf.solves = result.solves.iter().map(Into::into).collect();
    output::write_manifest(out, &mf)?;
    Ok(())
}

pub fn plan(cfg: &RunConfig) -> CliResult<()> {
    let tr = cfg.build_transducer()?;
    let medium = medium(cfg)?;
    if cfg.n_harmonics < 2 {
        return Err(CliError::Config("a mesh plan needs at least two harmonics".into()));
    }
    print!("{}", make_plan(cfg, &tr, &medium)?.report());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Study {
    Quadrature,
    Domain,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[arg(long, value_enum)]
    pub study: Study,
    /// Resolutions studied (quadrature).
    #[arg(long, value_delimiter = ',', default_value = "4,6,8,10")]
    pub nw_values: Vec<usize>,
    /// Resolution of the reference solution (quadrature).
    #[arg(long, default_value_t = 20)]
    pub nw_ref: usize,
    /// Axial length of the box about the focus, m (quadrature).
    #[arg(long, default_value_t = 0.02)]
    pub length: f64,
    /// Box width in second-harmonic wavelengths (quadrature).
    #[arg(long, default_value_t = 4)]
    pub width_wavelengths: usize,
    /// Shrink levels per sweep (domain).
    #[arg(long, default_value_t = 12)]
    pub levels: usize,
}

/// Second-harmonic box about the focus, snapped to whole wavelengths.
pub fn quadrature_domain(tr: &BowlTransducer<f64>, medium: &Medium<f64>, length: f64, width: usize) -> CliResult<DomainBox<f64>> {
    let l2 = medium.wavelength(tr.f0, 2);
    let nl = (length / l2).round().max(1.0);
    let half_x = 0.5 * nl * l2;
    let half_w = 0.5 * width.max(1) as f64 * l2;
    let l = tr.focal_length;
    DomainBox::new([l - half_x, -half_w, -half_w], [l + half_x, half_w, half_w]).map_err(config_err)
}

fn plot_data(series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut s = String::new();
    for (name, pts) in series {
        s.push_str(&format!("# series {name}\n"));
        for (x, y) in pts {
            s.push_str(&format!("{x} {y}\n"));
        }
        s.push_str("\n\n");
    }
    s
}

fn write_records(path: &Path, records: &[ConvergenceRecord]) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_records_csv(records, file)?;
    Ok(())
}

pub fn converge(cfg: &RunConfig, args: &ConvergeArgs) -> CliResult<()> {
    let tr = cfg.build_transducer()?;
    let medium = medium(cfg)?;
    if args.study == Study::Quadrature && args.nw_values.iter().any(|&n| n == 0 || n >= args.nw_ref) {
        return Err(CliError::Config("every --nw-values entry must be positive and below --nw-ref".into()));
    }
    if args.study == Study::Domain && cfg.n_harmonics < 2 {
        return Err(CliError::Config("the domain study needs at least two harmonics".into()));
    }
    let domain = quadrature_domain(&tr, &medium, args.length, args.width_wavelengths)?;
    output::create_dir(&cfg.out)?;
    let disc = ApertureDisc::for_transducer(&tr, cfg.disc_spacing);
    let incident = tr.incident_field(&medium, &disc)?;
    let mut files = Vec::new();

    match args.study {
        Study::Quadrature => {
            let study = QuadratureStudy {
                incident,
                medium,
                domain,
                n_w_values: args.nw_values.clone(),
                n_w_ref: args.nw_ref,
            };
            let res = study.run()?;
            write_records(&cfg.out.join("quadrature.csv"), &res.records)?;
            let pts = res.records.iter().map(|r| (r.value, r.error_percent)).collect();
            output::write_text(&cfg.out.join("quadrature_plot.dat"), &plot_data(&[("p2 error vs n_w".into(), pts)]))?;
            files.extend(["quadrature.csv".to_string(), "quadrature_plot.dat".to_string()]);
            for r in &res.records {
                println!("n_w = {:>3}: error {:.4} %", r.value, r.error_percent);
            }
            println!("fitted slope {:.3}", res.slope);
        }
        Study::Domain => {
            let plan = plan_single_mesh(&tr, &medium, cfg.post_focal, cfg.n_w, cfg.n_harmonics).map_err(config_err)?;
            let reference = reference_harmonics(&incident, &medium, &plan.reference.grid, cfg.n_harmonics)?;
            let mut levels: Vec<ShrinkLevel> =
                geometric_levels(0.25, 8.0, args.levels).into_iter().map(|q| ShrinkLevel::Threshold(-q)).collect();
            levels.extend(geometric_levels(0.1, 1.0, args.levels).into_iter().map(ShrinkLevel::FractionX));
            levels.extend(geometric_levels(0.05, 1.0, args.levels).into_iter().map(ShrinkLevel::FractionYz));
            let records = reference.shrink_study(&levels)?;
            write_records(&cfg.out.join("domain.csv"), &records)?;

            let mut trend = String::from("harmonic,q0,trend_percent\n");
            let mut crossings = String::from("harmonic,control_variable,value_at_1_percent\n");
            let mut series = Vec::new();
            for n in 2..=cfg.n_harmonics {
                for l in &levels {
                    if let ShrinkLevel::Threshold(q) = l {
                        trend.push_str(&format!("{n},{q},{}\n", reference.trend_percent(n, *q)?));
                    }
                }
                for c in ["q0", "fraction_x", "fraction_yz"] {
                    let v = crossing_value(&records, n, c, 1.0).map_or("none".into(), |v| v.to_string());
                    crossings.push_str(&format!("{n},{c},{v}\n"));
                    let pts = records
                        .iter()
                        .filter(|r| r.harmonic == n && r.control_variable == c)
                        .map(|r| (r.value, r.error_percent))
                        .collect();
                    series.push((format!("p{n} {c}"), pts));
                }
            }
            output::write_text(&cfg.out.join("domain_trend.csv"), &trend)?;
            output::write_text(&cfg.out.join("domain_crossings.csv"), &crossings)?;
            output::write_text(&cfg.out.join("domain_plot.dat"), &plot_data(&series))?;
            print!("{crossings}");
            files.extend(["domain.csv", "domain_trend.csv", "domain_crossings.csv", "domain_plot.dat"].map(String::from));
        }
    }
    output::write_manifest(&cfg.out, &manifest("converge", cfg, files))?;
    Ok(())
}

/// Quick numerical self-checks; returns the number of failures.
pub fn validate() -> CliResult<usize> {
    type Check = fn() -> nestfus::Result<(bool, String)>;
    let checks: Vec<(&str, Check)> = vec![
        ("fft matches direct summation", crate::checks::fft_direct),
        ("potential is linear", crate::checks::linearity),
        ("self weight small-k limit", crate::checks::self_weight_limit),
        ("monopole sum matches closed-form axis field", crate::checks::axis_oracle),
        ("power normalization on refined disc", crate::checks::power),
        ("cascade homogeneity law", crate::checks::homogeneity),
        ("zero-contrast vie operator is identity", crate::checks::vie_identity),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, e.to_string()),
        };
        if !ok {
            failures += 1;
        }
        println!("[{}] {name}: {detail}", if ok { "ok" } else { "FAIL" });
    }
    Ok(failures)
}
