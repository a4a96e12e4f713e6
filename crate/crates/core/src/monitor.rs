//! The rule monitor: a persisted ready queue (LRRE) drained one rule at a time.
//!
//! Every transition is written ahead of its effect, so any crash leaves a state from
//! which re-running pending rules reproduces the crash-free tables.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::lang::{InitKind, RuleDef, Workspace};
use crate::process::{apply_rule_with, Options, Report};
use crate::store::{file_name, Store, StoreError};
use crate::table::{parse_table, write_raw, RawTable, Table};

pub const DEFAULT_RETRY_CAP: u32 = 3;

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("system table `{table}` is corrupt: {message}")]
    CorruptQueue { table: String, message: String },
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("no quiescence after {} steps", .0.executed.len())]
    NonQuiescent(RunReport),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Entry {
    pub seq: u64,
    pub rule: String,
    pub reason: String,
    pub failures: u32,
    pub parked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Executed {
    pub rule: String,
    /// Output tables whose content changed.
    pub changed: Vec<String>,
    pub reports: Vec<Report>,
    /// Set when the rule failed; the entry stays queued until the retry cap parks it.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunReport {
    pub executed: Vec<Executed>,
    pub quiescent: bool,
}

impl RunReport {
    pub fn rules(&self) -> Vec<&str> {
        self.executed.iter().map(|e| e.rule.as_str()).collect()
    }
}

pub struct Monitor {
    ws: Workspace,
    store: Store,
    queue: Vec<Entry>,
    started: BTreeSet<String>,
    pub retry_cap: u32,
    pub options: Options<'static>,
}

fn corrupt(table: &str, message: impl Into<String>) -> MonitorError {
    MonitorError::CorruptQueue {
        table: table.to_string(),
        message: message.into(),
    }
}

impl Monitor {
    /// Open the monitor over a store, reloading any persisted queue.
    pub fn open(ws: Workspace, store: Store) -> Result<Self, MonitorError> {
        let mut m = Monitor {
            ws,
            store,
            queue: Vec::new(),
            started: BTreeSet::new(),
            retry_cap: DEFAULT_RETRY_CAP,
            options: Options::default(),
        };
        m.recover()?;
        Ok(m)
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut Store {
        &mut self.store
    }

    pub fn queue(&self) -> &[Entry] {
        &self.queue
    }

    pub fn pending(&self) -> impl Iterator<Item = &Entry> {
        self.queue.iter().filter(|e| !e.parked)
    }

    /// Reload LRRE and the at-start marks. Never resets an unreadable queue.
    pub fn recover(&mut self) -> Result<(), MonitorError> {
        self.queue.clear();
        self.started.clear();
        if let Some(text) = self.store.read_system("lrre")? {
            let raw = parse_table(&text).map_err(|e| corrupt("lrre", e.to_string()))?;
            for (seq, v) in &raw.rows {
                let [rule, reason, failures, state] = v.as_slice() else {
                    return Err(corrupt("lrre", format!("row {seq} has {} values", v.len())));
                };
                let entry = Entry {
                    seq: seq.parse().map_err(|_| corrupt("lrre", format!("bad sequence `{seq}`")))?,
                    rule: rule.clone(),
                    reason: reason.clone(),
                    failures: failures.parse().map_err(|_| corrupt("lrre", format!("bad failure count `{failures}`")))?,
                    parked: match state.as_str() {
                        "pending" => false,
                        "parked" => true,
                        other => return Err(corrupt("lrre", format!("bad state `{other}`"))),
                    },
                };
                if !self.ws.rules.contains_key(&entry.rule) {
                    return Err(corrupt("lrre", format!("unknown rule `{}`", entry.rule)));
                }
                self.queue.push(entry);
            }
            self.queue.sort_by_key(|e| e.seq);
        }
        if let Some(text) = self.store.read_system("ltpin")? {
            let raw = parse_table(&text).map_err(|e| corrupt("ltpin", e.to_string()))?;
            for (rule, v) in &raw.rows {
                if v.get(2).is_some_and(|s| s == "done") {
                    self.started.insert(rule.clone());
                }
            }
        }
        Ok(())
    }

    fn ltpd(&self) -> String {
        let list = |v: &[String]| if v.is_empty() { "-".to_string() } else { v.join(" ") };
        write_raw(&RawTable {
            series: "LTP-D".into(),
            columns: vec!["LIT".into(), "LOT".into()],
            rows: self.ws.rules.values().map(|r| (r.name.clone(), vec![list(&r.inputs), list(&r.outputs)])).collect(),
            ..Default::default()
        })
    }

    fn ltpin(&self) -> String {
        write_raw(&RawTable {
            series: "LTP-In".into(),
            columns: vec!["type".into(), "name".into(), "state".into()],
            rows: self
                .ws
                .inits
                .iter()
                .map(|i| {
                    let (kind, name) = match &i.kind {
                        InitKind::AtStart => ("at-start", "-".to_string()),
                        InitKind::OnEvent(e) => ("on-event", e.clone()),
                    };
                    let state = if self.started.contains(&i.rule) { "done" } else { "-" };
                    (i.rule.clone(), vec![kind.to_string(), name, state.to_string()])
                })
                .collect(),
            ..Default::default()
        })
    }

    fn lrre(&self) -> String {
        write_raw(&RawTable {
            series: "LRRE".into(),
            columns: vec!["rule".into(), "reason".into(), "failures".into(), "state".into()],
            rows: self
                .queue
                .iter()
                .map(|e| {
                    let state = if e.parked { "parked" } else { "pending" };
                    (e.seq.to_string(), vec![e.rule.clone(), e.reason.clone(), e.failures.to_string(), state.to_string()])
                })
                .collect(),
            ..Default::default()
        })
    }

    fn persist_queue(&mut self) -> Result<(), MonitorError> {
        let text = self.lrre();
        self.store.write_system("lrre", &text)?;
        Ok(())
    }

    /// Add rules to the in-memory queue, sorted by name within one batch. A rule keeps
    /// at most one pending entry besides the one currently executing.
    fn enqueue(&mut self, rules: BTreeSet<String>, reason: &str, executing: Option<u64>) -> bool {
        let mut next = self.queue.iter().map(|e| e.seq).max().unwrap_or(0) + 1;
        let mut added = false;
        for rule in rules {
            if self.queue.iter().any(|e| e.rule == rule && !e.parked && Some(e.seq) != executing) {
                continue;
            }
            self.queue.push(Entry {
                seq: next,
                rule,
                reason: reason.replace([',', '\n'], " "),
                failures: 0,
                parked: false,
            });
            next += 1;
            added = true;
        }
        added
    }

    fn readers_of<'a>(&self, series: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
        let series: BTreeSet<&str> = series.into_iter().collect();
        self.ws
            .rules
            .values()
            .filter(|r| r.inputs.iter().any(|i| series.contains(i.as_str())))
            .map(|r| r.name.clone())
            .collect()
    }

    /// Queue every rule reading `series`, persisting the queue before returning.
    pub fn notify_update(&mut self, series: &str, reason: &str) -> Result<Vec<String>, MonitorError> {
        let rules = self.readers_of([series]);
        let names: Vec<String> = rules.iter().cloned().collect();
        if self.enqueue(rules, reason, None) {
            self.persist_queue()?;
        }
        Ok(names)
    }

    /// Store a new or edited input table. Readers are queued before the table is written.
    pub fn ingest(&mut self, table: &Table) -> Result<bool, MonitorError> {
        if !self.store.would_change(table) {
            return Ok(false);
        }
        let reason = file_name(&table.key());
        self.notify_update(&table.series, &reason)?;
        Ok(self.store.replace_table(table)?)
    }

    /// Queue at-start rules that have not yet been started, then record them as started.
    pub fn initialize(&mut self) -> Result<Vec<String>, MonitorError> {
        self.store.write_system("ltpd", &self.ltpd())?;
        let mut fresh = BTreeSet::new();
        for i in &self.ws.inits {
            if !self.ws.rules.contains_key(&i.rule) {
                return Err(MonitorError::UnknownRule(i.rule.clone()));
            }
            if i.kind == InitKind::AtStart && !self.started.contains(&i.rule) {
                fresh.insert(i.rule.clone());
            }
        }
        let names: Vec<String> = fresh.iter().cloned().collect();
        if self.enqueue(fresh, "at-start", None) {
            self.persist_queue()?;
        }
        self.started.extend(names.iter().cloned());
        let text = self.ltpin();
        self.store.write_system("ltpin", &text)?;
        Ok(names)
    }

    /// Queue the rules registered for an external event label.
    pub fn deliver_event(&mut self, event: &str) -> Result<Vec<String>, MonitorError> {
        let rules: BTreeSet<String> = self
            .ws
            .inits
            .iter()
            .filter(|i| i.kind == InitKind::OnEvent(event.to_string()))
            .map(|i| i.rule.clone())
            .collect();
        let names: Vec<String> = rules.iter().cloned().collect();
        if self.enqueue(rules, &format!("event {event}"), None) {
            self.persist_queue()?;
        }
        Ok(names)
    }

    /// Run the oldest pending rule.
    pub fn step(&mut self) -> Result<Option<Executed>, MonitorError> {
        self.step_with(|_| 0)
    }

    /// Run the pending entry chosen by `pick` (an index into the pending entries).
    pub fn step_with(&mut self, pick: impl FnOnce(&[&Entry]) -> usize) -> Result<Option<Executed>, MonitorError> {
        let pending: Vec<&Entry> = self.pending().collect();
        if pending.is_empty() {
            return Ok(None);
        }
        let k = pick(&pending).min(pending.len() - 1);
        let entry = pending[k].clone();
        let rule: RuleDef = self.ws.rules.get(&entry.rule).cloned().ok_or_else(|| MonitorError::UnknownRule(entry.rule.clone()))?;

        let outcome = self.load_and_apply(&rule);
        let (outputs, reports) = match outcome {
            Ok(o) => o,
            Err(message) => {
                let cap = self.retry_cap;
                let e = self.queue.iter_mut().find(|e| e.seq == entry.seq).expect("entry is queued");
                e.failures += 1;
                e.parked = e.failures >= cap;
                self.persist_queue()?;
                return Ok(Some(Executed {
                    rule: rule.name,
                    changed: Vec::new(),
                    reports: Vec::new(),
                    failure: Some(message),
                }));
            }
        };
        let changed: Vec<&Table> = outputs.iter().filter(|t| self.store.would_change(t)).collect();
        if !changed.is_empty() {
            let series: BTreeSet<&str> = changed.iter().map(|t| t.series.as_str()).collect();
            let readers = self.readers_of(series);
            if self.enqueue(readers, &format!("output of {}", rule.name), Some(entry.seq)) {
                self.persist_queue()?;
            }
        }
        let mut written = Vec::new();
        for t in &changed {
            if self.store.replace_table(t)? {
                written.push(file_name(&t.key()));
            }
        }
        // commit point
        self.queue.retain(|e| e.seq != entry.seq);
        self.persist_queue()?;
        Ok(Some(Executed {
            rule: rule.name,
            changed: written,
            reports,
            failure: None,
        }))
    }

    fn load_and_apply(&self, rule: &RuleDef) -> Result<(Vec<Table>, Vec<Report>), String> {
        let mut inputs = Vec::new();
        for s in &rule.inputs {
            inputs.extend(self.store.tables_of(&self.ws, s).map_err(|e| e.to_string())?);
        }
        let mut prior = Vec::new();
        for s in &rule.outputs {
            prior.extend(self.store.tables_of(&self.ws, s).map_err(|e| e.to_string())?);
        }
        let o = apply_rule_with(&self.ws, rule, &inputs, &prior, self.options).map_err(|e| e.to_string())?;
        Ok((o.outputs, o.reports))
    }

    /// Step until the queue has no pending entries or `max_steps` steps have run.
    pub fn run_to_quiescence(&mut self, max_steps: usize) -> Result<RunReport, MonitorError> {
        let mut report = RunReport::default();
        while report.executed.len() < max_steps {
            match self.step()? {
                Some(e) => report.executed.push(e),
                None => {
                    report.quiescent = true;
                    return Ok(report);
                }
            }
        }
        if self.pending().next().is_none() {
            report.quiescent = true;
            return Ok(report);
        }
        Err(MonitorError::NonQuiescent(report))
    }
}
