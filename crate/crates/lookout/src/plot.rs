//! SVG charts from a run directory's CSV logs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use plotters::prelude::*;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
struct SummaryPoint {
    step: f64,
    mean_reward: f64,
    policy_loss: f64,
    value_loss: f64,
}

#[derive(Debug, Deserialize)]
struct EpisodePoint {
    episode: f64,
    reward: f64,
    mean_performance: f64,
    help_count: f64,
    mean_resource: f64,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = r
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(rows)
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo - pad, hi + pad)
}

/// One panel per entry of `panels`, stacked vertically.
pub fn line_chart(path: &Path, title: &str, x_label: &str, panels: &[(&str, Vec<Series>)]) -> Result<()> {
    let height = 320 * panels.len() as u32;
    let root = SVGBackend::new(path, (800, height)).into_drawing_area();
    root.fill(&WHITE)?;
    let root = root.titled(title, ("sans-serif", 22))?;
    let areas = root.split_evenly((panels.len(), 1));
    for (area, (y_label, series)) in areas.iter().zip(panels) {
        let xs = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let ys = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
        let mut chart = ChartBuilder::on(area)
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(64)
            .build_cartesian_2d(xs.0..xs.1, ys.0..ys.1)?;
        chart
            .configure_mesh()
            .x_desc(x_label)
            .y_desc(*y_label)
            .draw()?;
        for (i, s) in series.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            chart
                .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))?
                .label(s.name)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        }
        if series.len() > 1 {
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()?;
        }
    }
    root.present()?;
    Ok(())
}

/// Writes `reward_vs_step.svg`, `performance_vs_episode.svg`,
/// `help_vs_episode.svg` and `resource_vs_episode.svg` for `run_dir` into
/// `out`, returning the paths written.
pub fn plot_run(run_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let summary: Vec<SummaryPoint> = read_rows(&run_dir.join(crate::run::SUMMARY_CSV))?;
    let episodes: Vec<EpisodePoint> = read_rows(&run_dir.join(crate::run::EPISODES_CSV))?;
    if summary.is_empty() && episodes.is_empty() {
        bail!("{} has no summary rows or episodes to plot", run_dir.display());
    }
    let mut written = Vec::new();

    let p = out.join("reward_vs_step.svg");
    line_chart(
        &p,
        "Cumulative reward and loss",
        "agent-steps",
        &[
            (
                "mean episode reward",
                vec![Series {
                    name: "reward",
                    points: summary.iter().map(|r| (r.step, r.mean_reward)).collect(),
                }],
            ),
            (
                "loss",
                vec![
                    Series {
                        name: "policy loss",
                        points: summary.iter().map(|r| (r.step, r.policy_loss)).collect(),
                    },
                    Series {
                        name: "value loss",
                        points: summary.iter().map(|r| (r.step, r.value_loss)).collect(),
                    },
                ],
            ),
        ],
    )?;
    written.push(p);

    let per_episode: [(&str, &str, &str, fn(&EpisodePoint) -> f64); 3] = [
        ("performance_vs_episode.svg", "Performance", "mean performance", |e| e.mean_performance),
        ("help_vs_episode.svg", "Help count", "help count", |e| e.help_count),
        ("resource_vs_episode.svg", "Resource level", "mean resource", |e| e.mean_resource),
    ];
    for (file, title, label, get) in per_episode {
        let p = out.join(file);
        let mut panels = vec![(
            label,
            vec![Series {
                name: label,
                points: episodes.iter().map(|e| (e.episode, get(e))).collect(),
            }],
        )];
        if file.starts_with("performance") {
            panels.push((
                "episode reward",
                vec![Series {
                    name: "reward",
                    points: episodes.iter().map(|e| (e.episode, e.reward)).collect(),
                }],
            ));
        }
        line_chart(&p, title, "episode", &panels)?;
        written.push(p);
    }
    Ok(written)
}
