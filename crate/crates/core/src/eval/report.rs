use std::fmt::Write as _;

/// Metrics of one test user, indexed like [`MetricReport::k_values`].
#[derive(Clone, Debug, PartialEq)]
pub struct UserMetrics {
    pub user: usize,
    pub train_count: usize,
    pub cohort: usize,
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub k_values: Vec<usize>,
    pub cohort_bounds: Vec<usize>,
    /// Eligible users in ascending index order.
    pub users: Vec<UserMetrics>,
}

/// One aggregated line of a report. `cohort` is `"all"` or a training-count
/// range such as `"[25,50)"`.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub cohort: String,
    pub k: usize,
    pub recall: f64,
    pub ndcg: f64,
    pub users: usize,
}

impl MetricReport {
    fn k_index(&self, k: usize) -> usize {
        self.k_values
            .iter()
            .position(|&x| x == k)
            .unwrap_or_else(|| panic!("k={k} not in report"))
    }

    fn mean<'a>(&self, users: impl Iterator<Item = &'a UserMetrics>, pick: impl Fn(&UserMetrics) -> f64) -> (f64, usize) {
        let (sum, n) = users.fold((0.0, 0), |(s, n), u| (s + pick(u), n + 1));
        (if n == 0 { f64::NAN } else { sum / n as f64 }, n)
    }

    /// Mean Recall@k over all eligible users.
    pub fn recall(&self, k: usize) -> f64 {
        let ki = self.k_index(k);
        self.mean(self.users.iter(), |u| u.recall[ki]).0
    }

    /// Mean NDCG@k over all eligible users.
    pub fn ndcg(&self, k: usize) -> f64 {
        let ki = self.k_index(k);
        self.mean(self.users.iter(), |u| u.ndcg[ki]).0
    }

    pub fn cohort_labels(&self) -> Vec<String> {
        let mut edges = vec![0];
        edges.extend(&self.cohort_bounds);
        (0..edges.len())
            .map(|c| match edges.get(c + 1) {
                Some(hi) => format!("[{},{})", edges[c], hi),
                None => format!("[{},inf)", edges[c]),
            })
            .collect()
    }

    /// Rows for `all` followed by each cohort, every k in order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let labels = self.cohort_labels();
        let groups = std::iter::once(("all".to_string(), None)).chain(labels.into_iter().enumerate().map(|(c, l)| (l, Some(c))));
        let mut rows = Vec::new();
        for (label, cohort) in groups {
            for (ki, &k) in self.k_values.iter().enumerate() {
                let members = || self.users.iter().filter(|u| cohort.is_none_or(|c| u.cohort == c));
                let (recall, n) = self.mean(members(), |u| u.recall[ki]);
                let (ndcg, _) = self.mean(members(), |u| u.ndcg[ki]);
                rows.push(SummaryRow {
                    cohort: label.clone(),
                    k,
                    recall,
                    ndcg,
                    users: n,
                });
            }
        }
        rows
    }

    /// Aligned plain-text table.
    pub fn render_table(&self) -> String {
        let rows = self.summary();
        let width = rows.iter().map(|r| r.cohort.len()).max().unwrap_or(0).max(6);
        let mut out = format!(
            "{:<width$}  {:>4}  {:>9}  {:>9}  {:>6}\n",
            "cohort", "k", "recall", "ndcg", "users"
        );
        for r in rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>4}  {:>9.6}  {:>9.6}  {:>6}",
                r.cohort, r.k, r.recall, r.ndcg, r.users
            );
        }
        out
    }

    /// `metric k cohort value count` lines.
    pub fn render_lines(&self) -> String {
        let mut out = String::new();
        for r in self.summary() {
            let _ = writeln!(out, "recall {} {} {:?} {}", r.k, r.cohort, r.recall, r.users);
            let _ = writeln!(out, "ndcg {} {} {:?} {}", r.k, r.cohort, r.ndcg, r.users);
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("k,cohort,recall,ndcg,users\n");
        for r in self.summary() {
            let _ = writeln!(out, "{},{},{:?},{:?},{}", r.k, r.cohort, r.recall, r.ndcg, r.users);
        }
        out
    }
}
