//! `stoloc analyze`: generated spectra and their summary tables.

use serde::Serialize;

use stoloc::analysis::{
    correlation_length_report, fprime1_report, generated_spectrum, w2_separation, BoundCheck, CorrelationLength,
    SpectrumReport, W2Separation,
};
use stoloc::output::{fmt_f64, write_json, write_rows_csv, write_with_header};

use crate::config::AnalyzeSpec;
use crate::error::CliResult;
use crate::{Format, Settings};

#[derive(Serialize)]
struct FPrimeRow {
    c: f64,
    bounds: BoundCheck,
}

#[derive(Serialize)]
struct W2Row {
    n: usize,
    r: usize,
    alpha: f64,
    separation: W2Separation,
}

#[derive(Serialize)]
struct Analysis {
    spectra: Vec<SpectrumReport>,
    correlation_length: Vec<CorrelationLength>,
    w2_separation: Vec<W2Row>,
    fprime: Vec<FPrimeRow>,
}

fn compute(spec: &AnalyzeSpec) -> CliResult<Analysis> {
    let mut spectra = Vec::new();
    let mut w2 = Vec::new();
    for &n in &spec.n {
        for &r in &spec.r {
            for &alpha in &spec.alpha {
                spectra.push(generated_spectrum(n, r, alpha)?);
                w2.push(W2Row { n, r, alpha, separation: w2_separation(n, alpha, r) });
            }
        }
    }
    let mut xi = Vec::new();
    for &r in &spec.xi_r {
        for &alpha in &spec.xi_alpha {
            xi.push(correlation_length_report(r, alpha)?);
        }
    }
    let fprime = spec.c.iter().map(|&c| Ok(FPrimeRow { c, bounds: fprime1_report(c)? })).collect::<CliResult<_>>()?;
    Ok(Analysis { spectra, correlation_length: xi, w2_separation: w2, fprime })
}

fn bound_cells(b: &BoundCheck) -> [String; 5] {
    [fmt_f64(b.value), fmt_f64(b.lower), fmt_f64(b.upper), b.lower_holds.to_string(), b.upper_holds.to_string()]
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn run(settings: &Settings, spec: &AnalyzeSpec) -> CliResult<()> {
    let a = compute(spec)?;
    let header = settings.header("analyze");
    match settings.format {
        Format::Json => write_json(&header, settings.create("analysis", "json")?, &a)?,
        Format::Csv => {
            for s in &a.spectra {
                let h = header.clone().with("n", s.n).with("r", s.r).with("alpha", s.alpha).with("one_sigma_one", fmt_f64(s.one_sigma_one));
                let name = format!("spectrum_n{}_r{}_alpha{}", s.n, s.r, s.alpha);
                write_with_header(&h, settings.create(&name, "csv")?, |w| s.write_csv(w))?;
            }
            let rows = a.correlation_length.iter().map(|x| {
                let mut row = vec![x.r.to_string(), fmt_f64(x.alpha)];
                row.extend(bound_cells(&x.bounds));
                row
            });
            let cols = columns(&["r", "alpha", "xi2", "lower", "upper", "lower_holds", "upper_holds"]);
            write_rows_csv(&header, settings.create("correlation_length", "csv")?, &cols, rows)?;
            let rows = a.w2_separation.iter().map(|x| {
                vec![
                    x.n.to_string(),
                    x.r.to_string(),
                    fmt_f64(x.alpha),
                    fmt_f64(x.separation.bound),
                    fmt_f64(x.separation.threshold),
                    x.separation.preconditions_hold.to_string(),
                    x.separation.implication_holds.to_string(),
                ]
            });
            let cols = columns(&["n", "r", "alpha", "bound", "threshold", "preconditions_hold", "implication_holds"]);
            write_rows_csv(&header, settings.create("w2_separation", "csv")?, &cols, rows)?;
            let rows = a.fprime.iter().map(|x| {
                let mut row = vec![fmt_f64(x.c)];
                row.extend(bound_cells(&x.bounds));
                row
            });
            let cols = columns(&["c", "fprime1", "lower", "upper", "lower_holds", "upper_holds"]);
            write_rows_csv(&header, settings.create("fprime", "csv")?, &cols, rows)?;
        }
    }
    for s in &a.spectra {
        println!(
            "spectrum n={} r={} alpha={}: sigma_x(0) = {:.6}, <1, Sigma 1> = {:.6}",
            s.n, s.r, s.alpha, s.sigma_x[s.q.iter().position(|q| *q == 0.0).unwrap_or(0)], s.one_sigma_one
        );
    }
    let violated = |b: &BoundCheck| !b.holds();
    println!(
        "correlation length: {} of {} cells outside the bounds",
        a.correlation_length.iter().filter(|x| violated(&x.bounds)).count(),
        a.correlation_length.len()
    );
    println!(
        "F'(1; c): {} of {} values outside the bounds",
        a.fprime.iter().filter(|x| violated(&x.bounds)).count(),
        a.fprime.len()
    );
    Ok(())
}
