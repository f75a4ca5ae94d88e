//! Static SVG charts.

use std::fmt::Write;

const FONT: &str = "font-family=\"sans-serif\" font-size=\"11\"";
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 100.0).round() / 100.0)
    }
}

/// Grey-scale matrix: the darker the cell, the larger the value.
pub fn heatmap_svg(title: &str, ids: &[String], m: &[Vec<f64>]) -> String {
    let n = ids.len();
    let cell = 36.0;
    let (left, top) = (90.0, 60.0);
    let width = left + cell * n as f64 + 110.0;
    let height = top + cell * n as f64 + 30.0;
    let max = m.iter().flatten().copied().fold(0.0f64, f64::max);
    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        num(width),
        num(height),
        num(width),
        num(height)
    )
    .unwrap();
    writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").unwrap();
    writeln!(s, "<text x=\"{}\" y=\"20\" {FONT} font-size=\"14\">{}</text>", num(left), escape(title)).unwrap();
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let shade = if max > 0.0 { 255.0 * (1.0 - (v / max).clamp(0.0, 1.0)) } else { 255.0 };
            let g = shade.round() as u8;
            writeln!(
                s,
                "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({g},{g},{g})\" stroke=\"#ccc\"><title>{} to {}: {}</title></rect>",
                num(left + cell * j as f64),
                num(top + cell * i as f64),
                escape(&ids[i]),
                escape(&ids[j]),
                label(v)
            )
            .unwrap();
        }
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} text-anchor=\"end\">{}</text>",
            num(left - 6.0),
            num(top + cell * (i as f64 + 0.6)),
            escape(&ids[i])
        )
        .unwrap();
    }
    for (j, id) in ids.iter().enumerate() {
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} text-anchor=\"middle\">{}</text>",
            num(left + cell * (j as f64 + 0.5)),
            num(top - 6.0),
            escape(id)
        )
        .unwrap();
    }
    let lx = left + cell * n as f64 + 20.0;
    let steps = 5;
    for k in 0..=steps {
        let frac = k as f64 / steps as f64;
        let g = (255.0 * (1.0 - frac)).round() as u8;
        let y = top + 16.0 * k as f64;
        writeln!(s, "<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"14\" fill=\"rgb({g},{g},{g})\" stroke=\"#999\"/>", num(lx), num(y)).unwrap();
        writeln!(s, "<text x=\"{}\" y=\"{}\" {FONT}>{}</text>", num(lx + 20.0), num(y + 11.0), label(max * frac)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Grouped bars, one group per station.
pub fn bar_chart_svg(title: &str, ids: &[String], series: &[(&str, Vec<f64>)]) -> String {
    let group = 18.0 * series.len() as f64 + 16.0;
    let (left, top, plot_h) = (60.0, 40.0, 220.0);
    let width = left + group * ids.len() as f64 + 140.0;
    let height = top + plot_h + 50.0;
    let max = series.iter().flat_map(|(_, v)| v.iter()).copied().fold(0.0f64, f64::max).max(1e-12);
    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        num(width),
        num(height),
        num(width),
        num(height)
    )
    .unwrap();
    writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").unwrap();
    writeln!(s, "<text x=\"{}\" y=\"20\" {FONT} font-size=\"14\">{}</text>", num(left), escape(title)).unwrap();
    let base = top + plot_h;
    writeln!(s, "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>", num(left), num(base), num(left + group * ids.len() as f64), num(base)).unwrap();
    writeln!(s, "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>", num(left), num(top), num(left), num(base)).unwrap();
    for k in 0..=4 {
        let v = max * k as f64 / 4.0;
        let y = base - plot_h * k as f64 / 4.0;
        writeln!(s, "<text x=\"{}\" y=\"{}\" {FONT} text-anchor=\"end\">{}</text>", num(left - 4.0), num(y + 4.0), label(v)).unwrap();
    }
    for (i, id) in ids.iter().enumerate() {
        let x0 = left + group * i as f64 + 8.0;
        for (k, (_, values)) in series.iter().enumerate() {
            let h = plot_h * (values[i].max(0.0) / max);
            writeln!(
                s,
                "<rect x=\"{}\" y=\"{}\" width=\"16\" height=\"{}\" fill=\"{}\"/>",
                num(x0 + 18.0 * k as f64),
                num(base - h),
                num(h),
                PALETTE[k % PALETTE.len()]
            )
            .unwrap();
        }
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} text-anchor=\"middle\">{}</text>",
            num(x0 + 9.0 * series.len() as f64),
            num(base + 16.0),
            escape(id)
        )
        .unwrap();
    }
    legend(&mut s, left + group * ids.len() as f64 + 16.0, top, series.iter().map(|(n, _)| *n));
    s.push_str("</svg>\n");
    s
}

/// One polyline per series; `log_y` plots `log10(y)` of positive values.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)], log_y: bool) -> String {
    let (left, top, plot_w, plot_h) = (70.0, 40.0, 420.0, 260.0);
    let width = left + plot_w + 200.0;
    let height = top + plot_h + 60.0;
    let ty = |y: f64| if log_y { y.max(1e-300).log10() } else { y };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, p)| p.iter())
        .filter(|(_, y)| y.is_finite() && (!log_y || *y > 0.0))
        .map(|&(x, y)| (x, ty(y)))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| left + plot_w * (x - x0) / (x1 - x0);
    let sy = |y: f64| top + plot_h * (1.0 - (y - y0) / (y1 - y0));
    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        num(width),
        num(height),
        num(width),
        num(height)
    )
    .unwrap();
    writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").unwrap();
    writeln!(s, "<text x=\"{}\" y=\"20\" {FONT} font-size=\"14\">{}</text>", num(left), escape(title)).unwrap();
    writeln!(s, "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>", num(left), num(top), num(plot_w), num(plot_h)).unwrap();
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        writeln!(s, "<text x=\"{}\" y=\"{}\" {FONT} text-anchor=\"middle\">{}</text>", num(sx(fx)), num(top + plot_h + 16.0), label(fx)).unwrap();
        let yl = if log_y { format!("1e{:.1}", fy) } else { label(fy) };
        writeln!(s, "<text x=\"{}\" y=\"{}\" {FONT} text-anchor=\"end\">{}</text>", num(left - 4.0), num(sy(fy) + 4.0), yl).unwrap();
    }
    writeln!(s, "<text x=\"{}\" y=\"{}\" {FONT} text-anchor=\"middle\">{}</text>", num(left + plot_w / 2.0), num(top + plot_h + 36.0), escape(x_label)).unwrap();
    writeln!(
        s,
        "<text x=\"16\" y=\"{}\" {FONT} text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        num(top + plot_h / 2.0),
        num(top + plot_h / 2.0),
        escape(y_label)
    )
    .unwrap();
    for (k, (_, points)) in series.iter().enumerate() {
        let path: Vec<String> = points
            .iter()
            .filter(|(_, y)| y.is_finite() && (!log_y || *y > 0.0))
            .map(|&(x, y)| format!("{},{}", num(sx(x)), num(sy(ty(y)))))
            .collect();
        writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
            path.join(" "),
            PALETTE[k % PALETTE.len()]
        )
        .unwrap();
    }
    legend(&mut s, left + plot_w + 16.0, top, series.iter().map(|(n, _)| n.as_str()));
    s.push_str("</svg>\n");
    s
}

fn legend<'a>(s: &mut String, x: f64, y: f64, names: impl Iterator<Item = &'a str>) {
    for (k, name) in names.enumerate() {
        let yy = y + 16.0 * k as f64;
        writeln!(s, "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>", num(x), num(yy), PALETTE[k % PALETTE.len()]).unwrap();
        writeln!(s, "<text x=\"{}\" y=\"{}\" {FONT}>{}</text>", num(x + 16.0), num(yy + 10.0), escape(name)).unwrap();
    }
}
