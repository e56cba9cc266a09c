use std::fmt::Write as _;

use stockcaster_core::{SectorReport, TradeMetrics};

type Row = (&'static str, fn(&TradeMetrics) -> String);

const ROWS: [Row; 11] = [
    ("Next day's pred. price", |m| format!("{:.0}", m.next_day_predicted_price)),
    ("Huber loss", |m| format!("{:.5}", m.huber_loss_scaled)),
    ("Mean absolute error", |m| format!("{:.2}", m.mean_absolute_score)),
    ("Accuracy score", |m| format!("{:.4}", m.accuracy_score)),
    ("Total buy profit", |m| format!("{:.0}", m.total_buy_profit)),
    ("Total sell profit", |m| format!("{:.0}", m.total_sell_profit)),
    ("Total profit", |m| format!("{:.0}", m.total_profit)),
    ("Mean stock price", |m| format!("{:.0}", m.mean_stock_price)),
    ("Total profit/ Mean price", |m| format!("{:.0}", m.profit_to_mean_price_ratio)),
    ("Number of test cases", |m| m.n_test_cases.to_string()),
    ("Profit per trade", |m| format!("{:.2}", m.profit_per_trade)),
];

fn layout(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        for (i, c) in cells.iter().enumerate() {
            if i == 0 {
                let _ = write!(out, "{c:<w$}", w = widths[0]);
            } else {
                let _ = write!(out, "  {c:>w$}", w = widths[i]);
            }
        }
        for w in widths.iter().take(cols).skip(cells.len()) {
            let _ = write!(out, "  {:>w$}", "", w = *w);
        }
        let trimmed = out.trim_end().len();
        out.truncate(trimmed);
        out.push('\n');
    };
    line(header);
    for r in rows {
        line(r);
    }
    out
}

/// Metric rows down, one column per stock.
pub fn metrics_table(columns: &[(String, TradeMetrics)], sector_average: Option<f64>) -> String {
    let mut header = vec!["Metric".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    let mut rows: Vec<Vec<String>> = ROWS
        .iter()
        .map(|(label, f)| {
            let mut r = vec![label.to_string()];
            r.extend(columns.iter().map(|(_, m)| f(m)));
            r
        })
        .collect();
    if let Some(avg) = sector_average {
        rows.push(vec!["Avg. profit/mean price".to_string(), format!("{avg:.0}")]);
    }
    layout(&header, &rows)
}

pub fn ranking_table(ranked: &[SectorReport]) -> String {
    let header = ["Rank", "Sector", "Avg. profit/mean price", "Stocks"].map(String::from);
    let rows: Vec<Vec<String>> = ranked
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                r.sector.clone(),
                format!("{:.0}", r.sector_profitability),
                r.members.len().to_string(),
            ]
        })
        .collect();
    layout(&header, &rows)
}

pub fn ranking_csv(ranked: &[SectorReport]) -> String {
    let mut out = String::from("rank,sector,sector_profitability,stocks\n");
    for (i, r) in ranked.iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{}", i + 1, r.sector, r.sector_profitability, r.members.len());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics() -> TradeMetrics {
        TradeMetrics {
            total_buy_profit: 503415.0,
            total_sell_profit: 498601.0,
            total_profit: 1002016.0,
            mean_stock_price: 1307.0,
            profit_to_mean_price_ratio: 766.65,
            n_test_cases: 911,
            profit_per_trade: 1099.9077,
            accuracy_score: 0.98463,
            mean_absolute_score: 109.871,
            huber_loss_scaled: 0.000121,
            next_day_predicted_price: 4188.7,
        }
    }

    #[test]
    fn metric_rows_in_table_order() {
        let t = metrics_table(&[("BAJ".into(), metrics())], Some(987.2));
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 13);
        assert!(lines[0].starts_with("Metric") && lines[0].ends_with("BAJ"));
        assert!(lines[1].starts_with("Next day's pred. price") && lines[1].ends_with("4189"));
        assert!(lines[2].ends_with("0.00012"));
        assert!(lines[4].ends_with("0.9846"));
        assert!(lines[9].starts_with("Total profit/ Mean price") && lines[9].ends_with("767"));
        assert!(lines[11].ends_with("1099.91"));
        assert!(lines[12].starts_with("Avg. profit/mean price") && lines[12].ends_with("987"));
    }
}
