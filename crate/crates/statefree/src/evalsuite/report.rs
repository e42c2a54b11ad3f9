//! Report writers: CSV, a JSON mirror, and a static SVG bar chart per
//! protocol grouping.

use std::io::Write;
use std::path::Path;

use crate::evalsuite::grid::GridRow;

pub const CSV_HEADER: &str = "config_fingerprint,label,state_mode,cameras,action_space,\
n_episodes,epochs,dataset,protocol,condition,successes,trials,score";

/// Write grid rows as CSV.
pub fn write_csv(path: &Path, rows: &[GridRow]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.6}",
            r.config_fingerprint,
            r.label,
            r.state_mode,
            r.cameras,
            r.action_space,
            r.n_episodes,
            r.epochs,
            r.dataset,
            r.protocol,
            r.condition,
            r.successes,
            r.trials,
            r.score
        )?;
    }
    Ok(())
}

/// JSON mirror of the same rows.
pub fn write_json(path: &Path, rows: &[GridRow]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let json = serde_json::to_string_pretty(rows)?;
    std::fs::write(path, json)
}

/// Parse rows back from the CSV produced by [`write_csv`].
pub fn read_csv(path: &Path) -> std::io::Result<Vec<GridRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 13 {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("line {} has {} fields, expected 13", i + 1, parts.len()),
            ));
        }
        let parse_err =
            |what: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, what.to_string());
        rows.push(GridRow {
            config_fingerprint: parts[0].into(),
            label: parts[1].into(),
            state_mode: parts[2].into(),
            cameras: parts[3].into(),
            action_space: parts[4].into(),
            n_episodes: parts[5].parse().map_err(|_| parse_err("n_episodes"))?,
            epochs: parts[6].parse().map_err(|_| parse_err("epochs"))?,
            dataset: parts[7].into(),
            protocol: parts[8].into(),
            condition: parts[9].into(),
            successes: parts[10].parse().map_err(|_| parse_err("successes"))?,
            trials: parts[11].parse().map_err(|_| parse_err("trials"))?,
            score: parts[12].parse().map_err(|_| parse_err("score"))?,
        });
    }
    Ok(rows)
}

/// One grouped bar chart per protocol: a bar per row, height proportional
/// to the score. Static markup, no interactivity.
pub fn write_svg(path: &Path, rows: &[GridRow]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut protocols: Vec<String> = rows.iter().map(|r| r.protocol.clone()).collect();
    protocols.dedup();
    protocols.sort();
    protocols.dedup();

    let bar_w = 34;
    let gap = 10;
    let group_gap = 40;
    let chart_h = 160;
    let label_h = 120;
    let n_bars: usize = rows.len();
    let width = n_bars * (bar_w + gap) + protocols.len() * group_gap + 60;
    let height = chart_h + label_h + 40;

    let mut f = std::fs::File::create(path)?;
    writeln!(
        f,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         font-family=\"monospace\" font-size=\"10\">"
    )?;
    writeln!(f, "<text x=\"10\" y=\"16\">success rate by condition group</text>")?;
    let mut x = 30;
    for proto in &protocols {
        writeln!(f, "<text x=\"{x}\" y=\"{}\">{}</text>", 34, proto)?;
        for r in rows.iter().filter(|r| &r.protocol == proto) {
            let h = (r.score.clamp(0.0, 1.0) * chart_h as f64) as usize;
            let y = 40 + chart_h - h;
            writeln!(
                f,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{bar_w}\" height=\"{h}\" fill=\"#4878a8\"/>"
            )?;
            writeln!(
                f,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.2}</text>",
                x + bar_w / 2,
                y.saturating_sub(4).max(44),
                r.score
            )?;
            writeln!(
                f,
                "<text x=\"{}\" y=\"{}\" transform=\"rotate(60 {} {})\">{}</text>",
                x + bar_w / 2,
                40 + chart_h + 12,
                x + bar_w / 2,
                40 + chart_h + 12,
                r.label
            )?;
            x += bar_w + gap;
        }
        x += group_gap;
    }
    writeln!(f, "</svg>")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<GridRow> {
        vec![
            GridRow {
                config_fingerprint: "abc123".into(),
                label: "state-free".into(),
                state_mode: "none".into(),
                cameras: "overhead+dual-wide".into(),
                action_space: "rel-eef".into(),
                n_episodes: 300,
                epochs: 4,
                dataset: "standard".into(),
                protocol: "height".into(),
                condition: "all".into(),
                successes: 55,
                trials: 60,
                score: 55.0 / 60.0,
            },
            GridRow {
                config_fingerprint: "def456".into(),
                label: "state-based".into(),
                state_mode: "eef-pose".into(),
                cameras: "overhead+dual-wide".into(),
                action_space: "rel-eef".into(),
                n_episodes: 300,
                epochs: 4,
                dataset: "standard".into(),
                protocol: "height".into(),
                condition: "all".into(),
                successes: 3,
                trials: 60,
                score: 0.05,
            },
        ]
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = sample_rows();
        write_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(text.lines().count(), 3);
        let back = read_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].label, "state-free");
        assert!((back[0].score - rows[0].score).abs() < 1e-6);
    }

    #[test]
    fn json_and_svg_write() {
        let dir = tempfile::tempdir().unwrap();
        let rows = sample_rows();
        write_json(&dir.path().join("t.json"), &rows).unwrap();
        write_svg(&dir.path().join("t.svg"), &rows).unwrap();
        let svg = std::fs::read_to_string(dir.path().join("t.svg")).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("rect"));
        assert!(svg.trim_end().ends_with("</svg>"));
        let back: Vec<GridRow> =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("t.json")).unwrap())
                .unwrap();
        assert_eq!(back, rows);
    }
}
