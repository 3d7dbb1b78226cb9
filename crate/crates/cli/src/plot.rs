//! Self-contained SVG rendering of a pacing plan: power and velocity vs
//! distance in two stacked panels, with an optional recorded-ride overlay.
//! Plain text output keeps the figures diff-able and byte-stable.

use pacer_core::sil::RideLogRow;
use pacer_core::solver::PacingPlan;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 640.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 45.0;
const PANEL_GAP: f64 = 50.0;

struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Panel {
    fn sx(&self, x: f64) -> f64 {
        self.x0 + (x - self.xmin) / (self.xmax - self.xmin) * self.w
    }

    fn sy(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.ymin) / (self.ymax - self.ymin) * self.h
    }

    fn polyline(&self, pts: &[(f64, f64)], color: &str, width: f64, dash: &str) -> String {
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.sx(x), self.sy(y)))
            .collect();
        let dash_attr = if dash.is_empty() {
            String::new()
        } else {
            format!(" stroke-dasharray=\"{dash}\"")
        };
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash_attr} points=\"{}\"/>\n",
            coords.join(" ")
        )
    }
}

fn nice_ticks(min: f64, max: f64, target: usize) -> Vec<f64> {
    let span = (max - min).max(1e-9);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| span / s <= target as f64 + 0.5)
        .unwrap_or(10.0 * mag);
    let first = (min / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= max + 1e-9 {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn axes(out: &mut String, panel: &Panel, ylabel: &str) {
    out.push_str(&format!(
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n",
        panel.x0, panel.y0, panel.w, panel.h
    ));
    for tx in nice_ticks(panel.xmin, panel.xmax, 8) {
        let sx = panel.sx(tx);
        out.push_str(&format!(
            "<line x1=\"{sx:.2}\" y1=\"{:.2}\" x2=\"{sx:.2}\" y2=\"{:.2}\" stroke=\"#ddd\" stroke-width=\"0.6\"/>\n",
            panel.y0,
            panel.y0 + panel.h
        ));
        out.push_str(&format!(
            "<text x=\"{sx:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\" fill=\"#333\">{:.0}</text>\n",
            panel.y0 + panel.h + 16.0,
            tx
        ));
    }
    for ty in nice_ticks(panel.ymin, panel.ymax, 5) {
        let sy = panel.sy(ty);
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{sy:.2}\" x2=\"{:.2}\" y2=\"{sy:.2}\" stroke=\"#ddd\" stroke-width=\"0.6\"/>\n",
            panel.x0,
            panel.x0 + panel.w
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\" fill=\"#333\">{:.0}</text>\n",
            panel.x0 - 6.0,
            sy + 4.0,
            ty
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#000\" transform=\"rotate(-90 {:.2} {:.2})\">{ylabel}</text>\n",
        panel.x0 - 48.0,
        panel.y0 + panel.h / 2.0,
        panel.x0 - 48.0,
        panel.y0 + panel.h / 2.0
    ));
}

/// Renders the plan (and optional logged baseline ride) as an SVG document.
pub fn render_plan_svg(plan: &PacingPlan, baseline: Option<&[RideLogRow]>) -> String {
    // The plan's power is a per-interval target: draw it as steps.
    let dx = if plan.rows.len() >= 2 {
        plan.rows[1].x - plan.rows[0].x
    } else {
        100.0
    };
    let mut power_pts: Vec<(f64, f64)> = Vec::with_capacity(plan.rows.len() * 2);
    for (i, row) in plan.rows.iter().enumerate() {
        let x_end = plan.rows.get(i + 1).map(|r| r.x).unwrap_or(row.x + dx);
        power_pts.push((row.x, row.p));
        power_pts.push((x_end, row.p));
    }
    let mut vel_pts: Vec<(f64, f64)> = plan.rows.iter().map(|r| (r.x, r.v)).collect();
    if let Some(last) = power_pts.last().copied() {
        vel_pts.push((last.0, plan.final_velocity));
    }

    let base_power: Vec<(f64, f64)> = baseline
        .map(|rows| rows.iter().map(|r| (r.x, r.p_applied)).collect())
        .unwrap_or_default();
    let base_vel: Vec<(f64, f64)> = baseline
        .map(|rows| rows.iter().map(|r| (r.x, r.v)).collect())
        .unwrap_or_default();

    let xmax = power_pts
        .iter()
        .chain(base_power.iter())
        .map(|p| p.0)
        .fold(0.0, f64::max);
    let pmax = power_pts
        .iter()
        .chain(base_power.iter())
        .map(|p| p.1)
        .fold(0.0, f64::max)
        * 1.08
        + 1.0;
    let vmax = vel_pts
        .iter()
        .chain(base_vel.iter())
        .map(|p| p.1)
        .fold(0.0, f64::max)
        * 1.15
        + 0.1;

    let panel_h = (HEIGHT - MARGIN_T - MARGIN_B - PANEL_GAP) / 2.0;
    let power_panel = Panel {
        x0: MARGIN_L,
        y0: MARGIN_T,
        w: WIDTH - MARGIN_L - MARGIN_R,
        h: panel_h,
        xmin: 0.0,
        xmax,
        ymin: 0.0,
        ymax: pmax,
    };
    let vel_panel = Panel {
        x0: MARGIN_L,
        y0: MARGIN_T + panel_h + PANEL_GAP,
        w: WIDTH - MARGIN_L - MARGIN_R,
        h: panel_h,
        xmin: 0.0,
        xmax,
        ymin: 0.0,
        ymax: vmax,
    };

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{HEIGHT:.0}\" viewBox=\"0 0 {WIDTH:.0} {HEIGHT:.0}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\" fill=\"#000\">Pacing plan: power and velocity vs distance</text>\n",
        WIDTH / 2.0
    ));

    axes(&mut out, &power_panel, "power (W)");
    axes(&mut out, &vel_panel, "velocity (m/s)");
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#000\">distance (m)</text>\n",
        MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
        HEIGHT - 10.0
    ));

    if !base_power.is_empty() {
        out.push_str(&power_panel.polyline(&base_power, "#999999", 1.0, "4 3"));
        out.push_str(&vel_panel.polyline(&base_vel, "#999999", 1.0, "4 3"));
    }
    out.push_str(&power_panel.polyline(&power_pts, "#c0392b", 1.6, ""));
    out.push_str(&vel_panel.polyline(&vel_pts, "#2471a3", 1.6, ""));

    let legend_y = MARGIN_T - 12.0;
    out.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{legend_y:.2}\" x2=\"{:.2}\" y2=\"{legend_y:.2}\" stroke=\"#c0392b\" stroke-width=\"1.6\"/>\n",
        MARGIN_L,
        MARGIN_L + 24.0
    ));
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#000\">plan</text>\n",
        MARGIN_L + 30.0,
        legend_y + 4.0
    ));
    if !base_power.is_empty() {
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{legend_y:.2}\" x2=\"{:.2}\" y2=\"{legend_y:.2}\" stroke=\"#999999\" stroke-width=\"1.0\" stroke-dasharray=\"4 3\"/>\n",
            MARGIN_L + 80.0,
            MARGIN_L + 104.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#000\">recorded ride</text>\n",
            MARGIN_L + 110.0,
            legend_y + 4.0
        ));
    }
    out.push_str("</svg>\n");
    out
}
