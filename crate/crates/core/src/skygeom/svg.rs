use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{to_sky_point, AzEl, SkyBoundary, SkyPoint};

/// Width and height of the rendered skyplot, pixels.
pub const SVG_SIZE: f64 = 800.0;
const CENTER: f64 = SVG_SIZE / 2.0;
/// Pixels per sky unit; the horizon ring sits 40 px inside the canvas edge.
const SCALE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SatStatus {
    Kept,
    Excluded,
    Filtered,
}

impl SatStatus {
    fn color(self) -> &'static str {
        match self {
            SatStatus::Kept => "#2ca02c",
            SatStatus::Excluded => "#d62728",
            SatStatus::Filtered => "#999999",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatMarker {
    pub prn: String,
    pub az_el: AzEl,
    pub snr: f64,
    pub status: SatStatus,
}

fn canvas(p: &SkyPoint) -> (f64, f64) {
    (CENTER + SCALE * p.x, CENTER - SCALE * p.y)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders a north-up skyplot as an SVG 1.1 document. Output depends only on
/// the inputs and their order.
pub fn render_skyplot(sats: &[SatMarker], boundaries: &[SkyBoundary]) -> String {
    let mut s = String::new();
    let size = SVG_SIZE as u32;
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>"#);

    let _ = writeln!(s, r##"<g id="grid" fill="none" stroke="#bbbbbb" stroke-width="1">"##);
    for el in [0, 30, 60] {
        let r = SCALE * (90.0 - el as f64);
        let _ = writeln!(s, r#"<circle cx="{CENTER:.2}" cy="{CENTER:.2}" r="{r:.2}"/>"#);
    }
    for az in (0..360).step_by(30) {
        let (x, y) = canvas(&to_sky_point(&AzEl::new(az as f64, 0.0)));
        let _ = writeln!(s, r#"<line x1="{CENTER:.2}" y1="{CENTER:.2}" x2="{x:.2}" y2="{y:.2}"/>"#);
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r##"<g id="labels" font-family="sans-serif" font-size="14" fill="#444444" text-anchor="middle">"##);
    for (az, label) in [(0, "N"), (90, "E"), (180, "S"), (270, "W")] {
        let (x, y) = canvas(&to_sky_point(&AzEl::new(az as f64, -6.0)));
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}">{label}</text>"#, y + 5.0);
    }
    for el in [30, 60] {
        let (x, y) = canvas(&to_sky_point(&AzEl::new(0.0, el as f64)));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11">{el}°</text>"#, x + 12.0, y - 3.0);
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r##"<g id="boundaries" stroke="#e6c200" fill="none">"##);
    for b in boundaries {
        for (end, az) in [(&b.e, b.az_e), (&b.f, b.az_f)] {
            let (x1, y1) = canvas(end);
            let (x2, y2) = canvas(&to_sky_point(&AzEl::new(az, 0.0)));
            let _ = writeln!(
                s,
                r#"<line x1="{CENTER:.2}" y1="{CENTER:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke-width="1" stroke-dasharray="6,4"/>"#
            );
            let _ = writeln!(
                s,
                r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke-width="1" stroke-dasharray="2,4"/>"#
            );
        }
        let (x1, y1) = canvas(&b.e);
        let (x2, y2) = canvas(&b.f);
        let _ = writeln!(s, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke-width="4"/>"#);
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="satellites" font-family="sans-serif" font-size="12">"#);
    for sat in sats {
        let (x, y) = canvas(&to_sky_point(&sat.az_el));
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="9" fill="{}" fill-opacity="0.85" stroke="black" stroke-width="1"><title>{} az {:.1} el {:.1} snr {:.1}</title></circle>"#,
            sat.status.color(),
            escape(&sat.prn),
            sat.az_el.azimuth,
            sat.az_el.elevation,
            sat.snr
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 11.0, y - 8.0, escape(&sat.prn));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}
