//! CSV and gnuplot writers for metric reports.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{PdfReport, SpectrumReport, StructureFunctions};

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    w.write_record(header).map_err(|e| Error::Parse(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row per shell: `kappa,occupancy,<label>...`.
pub fn write_spectra_csv(path: &Path, spectra: &[(&str, &SpectrumReport)]) -> Result<()> {
    let Some((_, first)) = spectra.first() else {
        return Err(Error::Shape("no spectra to write".into()));
    };
    let mut header = vec!["kappa", "occupancy"];
    header.extend(spectra.iter().map(|(l, _)| *l));
    let rows = (0..first.kappa.len()).map(|i| {
        let mut row = vec![first.kappa[i].to_string(), first.occupancy[i].to_string()];
        row.extend(spectra.iter().map(|(_, s)| num(s.energy.get(i).copied().unwrap_or(f64::NAN))));
        row
    });
    write_rows(path, &header, rows)
}

/// One row per histogram bin, then KDE samples as `kde` rows.
pub fn write_pdf_csv(path: &Path, label: &str, pdf: &PdfReport) -> Result<()> {
    let hist = pdf
        .bin_centres()
        .into_iter()
        .zip(&pdf.density)
        .map(|(c, d)| vec![label.to_string(), "hist".into(), num(c), num(*d)])
        .collect::<Vec<_>>();
    let kde = pdf.kde.iter().flat_map(|k| {
        k.grid
            .iter()
            .zip(&k.density)
            .map(|(x, d)| vec![label.to_string(), "kde".into(), num(*x), num(*d)])
    });
    write_rows(path, &["series", "kind", "x", "density"], hist.into_iter().chain(kde))
}

/// One row per `(p, r)` pair.
pub fn write_structure_csv(path: &Path, series: &[(&str, &StructureFunctions)]) -> Result<()> {
    let rows = series.iter().flat_map(|(label, sf)| {
        sf.orders.iter().enumerate().flat_map(move |(i, p)| {
            sf.separations
                .iter()
                .enumerate()
                .map(move |(s, r)| vec![label.to_string(), p.to_string(), r.to_string(), num(sf.values[i][s])])
        })
    });
    write_rows(path, &["series", "p", "r", "S"], rows)
}

/// Per-step errors: `step,relative_l2`.
pub fn write_errors_csv(path: &Path, errors: &[(usize, Option<f64>)]) -> Result<()> {
    let rows = errors
        .iter()
        .map(|(k, e)| vec![k.to_string(), e.map_or(String::new(), num)]);
    write_rows(path, &["step", "relative_l2"], rows)
}

/// Writes whitespace-separated `.dat` copies of each CSV plus a gnuplot
/// script that plots them.
pub fn write_gnuplot(dir: &Path, csv_files: &[&str]) -> Result<()> {
    let mut script = String::from("# generated plot stub\nset datafile separator whitespace\nset key outside\n");
    for name in csv_files {
        let text = fs::read_to_string(dir.join(name))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let dat: String = std::iter::once(format!("# {}", header.replace(',', " ")))
            .chain(lines.map(|l| l.replace(',', " ")))
            .map(|l| l + "\n")
            .collect();
        let stem = name.trim_end_matches(".csv");
        fs::write(dir.join(format!("{stem}.dat")), dat)?;
        let columns = header.split(',').count();
        script.push_str(&format!(
            "set output '{stem}.png'\nset terminal pngcairo size 900,600\nplot '{stem}.dat' using 1:{columns} with linespoints title '{stem}'\n"
        ));
    }
    fs::write(dir.join("plots.gp"), script)?;
    Ok(())
}
