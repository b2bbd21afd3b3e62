//! Text and SVG heatmap rendering for score/test grids; darker means larger.

/// Glyph ramp used by the text renderer, lightest to darkest.
const RAMP: [char; 5] = [' ', '░', '▒', '▓', '█'];

#[derive(Debug, Clone)]
pub struct Heatmap<'a> {
    pub title: &'a str,
    pub row_labels: &'a [String],
    pub col_labels: &'a [String],
    /// Row-major values.
    pub values: &'a [Vec<f64>],
    /// Values at or below this render lightest.
    pub vmin: f64,
    /// Values at or above this render darkest.
    pub vmax: f64,
}

impl Heatmap<'_> {
    fn level(&self, v: f64) -> usize {
        if !v.is_finite() {
            return RAMP.len() - 1;
        }
        let span = self.vmax - self.vmin;
        let t = if span <= 0.0 {
            0.0
        } else {
            ((v - self.vmin) / span).clamp(0.0, 1.0)
        };
        ((t * RAMP.len() as f64) as usize).min(RAMP.len() - 1)
    }
}

fn short(label: &str, width: usize) -> String {
    let mut s: String = label.chars().take(width).collect();
    while s.chars().count() < width {
        s.push(' ');
    }
    s
}

/// Five-level glyph rendering with row and column labels.
pub fn render_text(map: &Heatmap) -> String {
    let label_w = map
        .row_labels
        .iter()
        .map(|l| l.chars().count())
        .max()
        .unwrap_or(0)
        .max(4);
    let cell_w = 3;
    let mut out = String::new();
    out.push_str(map.title);
    out.push('\n');
    out.push_str(&" ".repeat(label_w + 1));
    for c in map.col_labels {
        out.push_str(&short(c, cell_w));
        out.push(' ');
    }
    out.push('\n');
    for (i, row) in map.values.iter().enumerate() {
        out.push_str(&short(&map.row_labels[i], label_w));
        out.push(' ');
        for v in row {
            let g = RAMP[map.level(*v)];
            for _ in 0..cell_w {
                out.push(g);
            }
            out.push(' ');
        }
        out.push('\n');
    }
    out.push_str(&format!(
        "scale: {:.3} {} .. {} {:.3}\n",
        map.vmin,
        RAMP[0],
        RAMP[RAMP.len() - 1],
        map.vmax
    ));
    out
}

/// One rect per cell with a value tooltip.
pub fn render_svg(map: &Heatmap) -> String {
    let cell = 28usize;
    let left = 70usize;
    let top = 40usize;
    let rows = map.values.len();
    let cols = map.col_labels.len();
    let width = left + cols * cell + 10;
    let height = top + rows * cell + 10;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    out.push_str(&format!(
        "<text x=\"{left}\" y=\"14\" font-family=\"monospace\" font-size=\"12\">{}</text>\n",
        map.title
    ));
    for (j, c) in map.col_labels.iter().enumerate() {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"9\" text-anchor=\"middle\">{}</text>\n",
            left + j * cell + cell / 2,
            top - 6,
            c
        ));
    }
    let span = (map.vmax - map.vmin).max(f64::MIN_POSITIVE);
    for (i, row) in map.values.iter().enumerate() {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"9\" text-anchor=\"end\">{}</text>\n",
            left - 4,
            top + i * cell + cell / 2 + 3,
            map.row_labels[i]
        ));
        for (j, v) in row.iter().enumerate() {
            let t = if v.is_finite() {
                ((v - map.vmin) / span).clamp(0.0, 1.0)
            } else {
                1.0
            };
            let shade = (255.0 * (1.0 - t)).round() as u8;
            out.push_str(&format!(
                "<g><title>{} / {}: {v:.6}</title><rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" \
                 fill=\"rgb({shade},{shade},{shade})\" stroke=\"#888\"/></g>\n",
                map.row_labels[i],
                map.col_labels[j],
                left + j * cell,
                top + i * cell,
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}
