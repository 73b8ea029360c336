//! Human-readable output for `check` and `explore`.

use std::fmt::Write;

use vpdiff_core::interp::Exploration;
use vpdiff_core::{Certainty, Report, SymbolicEnv, UniqueDiff, Verdict};

pub fn report(r: &Report) -> String {
    let mut out = String::new();
    for p in &r.pairs {
        writeln!(out, "{} -> {}", p.old, p.new).unwrap();
        let rows: Vec<[String; 6]> = p
            .scenarios
            .iter()
            .map(|s| {
                [
                    s.handler.clone(),
                    s.kind.to_string(),
                    s.paths_new.to_string(),
                    s.paths_old.to_string(),
                    s.unique_diffs.to_string(),
                    s.possible_diffs.to_string(),
                ]
            })
            .chain(std::iter::once([
                "total".into(),
                String::new(),
                p.paths_new.to_string(),
                p.paths_old.to_string(),
                p.unique_diff_count.to_string(),
                p.possible_diffs.len().to_string(),
            ]))
            .collect();
        let header = [
            "scenario",
            "kind",
            "# paths new",
            "# paths old",
            "# diffs",
            "# possible",
        ];
        table(&mut out, &header, &rows);

        if !p.unique_diffs.is_empty() || !p.possible_diffs.is_empty() {
            writeln!(out, "\ndifferences:").unwrap();
            for d in p.unique_diffs.iter().chain(&p.possible_diffs) {
                diff_line(&mut out, d);
            }
        }
        let stopped: Vec<_> = p
            .scenarios
            .iter()
            .flat_map(|s| s.stopped_paths.iter().map(move |t| (s, t)))
            .collect();
        if !stopped.is_empty() {
            writeln!(out, "\nstopped paths:").unwrap();
            for (s, t) in stopped {
                let guide = t
                    .guide_path_id
                    .map(|g| format!(" (guided by new #{g})"))
                    .unwrap_or_default();
                writeln!(
                    out,
                    "  {} {} #{}{guide}: {}  when {}",
                    s.handler, t.side, t.path_id, t.status, t.pc
                )
                .unwrap();
            }
        }
        if !p.structural.is_empty() {
            writeln!(out, "\nstructural:").unwrap();
            for n in &p.structural {
                writeln!(out, "  {:?} {}: {}", n.kind, n.subject, n.detail).unwrap();
            }
        }
        if p.truncated {
            writeln!(out, "\nexploration truncated: path or step limit reached").unwrap();
        }
        if p.replay_failures > 0 {
            writeln!(out, "witnesses that failed replay: {}", p.replay_failures).unwrap();
        }
        writeln!(
            out,
            "\nwall time: {} ms, peak memory: {:.1} MB\n",
            p.wall_time_ms, p.peak_memory_mb
        )
        .unwrap();
    }
    let verdict = match r.verdict() {
        Verdict::Clean => "no differences",
        Verdict::Truncated => "no differences found (incomplete)",
        Verdict::PossibleOnly => "possible differences only",
        Verdict::Differences => "differences found",
    };
    writeln!(out, "verdict: {verdict}").unwrap();
    out
}

fn diff_line(out: &mut String, d: &UniqueDiff) {
    let tag = match d.certainty {
        Certainty::Confirmed => "CONFIRMED",
        Certainty::Possible => "POSSIBLE",
    };
    write!(out, "  [{tag}] {}", d.key).unwrap();
    if d.count > 1 {
        write!(out, " (x{})", d.count).unwrap();
    }
    if let (Some(n), Some(o)) = (d.new_value, d.old_value) {
        write!(out, "  new={n:#x} old={o:#x}").unwrap();
    }
    if let Some(w) = &d.witness {
        write!(out, "\n      witness: {w}").unwrap();
    }
    if let Some(r) = &d.reason {
        write!(out, "\n      reason: {r}").unwrap();
    }
    writeln!(out).unwrap();
}

fn table(out: &mut String, header: &[&str; 6], rows: &[[String; 6]]) {
    let mut widths = header.map(str::len);
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |out: &mut String, cells: [&str; 6]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        writeln!(out, "  {}", parts.join("  ").trim_end()).unwrap();
    };
    line(out, *header);
    for r in rows {
        line(out, [&r[0], &r[1], &r[2], &r[3], &r[4], &r[5]].map(|s| s.as_str()));
    }
}

pub fn exploration(handler: &str, env: &SymbolicEnv, ex: &Exploration) -> String {
    let mut out = String::new();
    writeln!(out, "{handler}: {} path(s)", ex.summaries.len()).unwrap();
    for s in &ex.summaries {
        write!(out, "\npath {}: {}", s.path_id, s.status).unwrap();
        if s.unknown {
            write!(out, " (solver unknown)").unwrap();
        }
        writeln!(out, "\n  pc: {}", s.pc).unwrap();
        for (f0, f1) in env.fields().iter().zip(s.final_state.fields()) {
            for (i, (a, b)) in f0.elems.iter().zip(&f1.elems).enumerate() {
                if a != b {
                    writeln!(out, "  {}[{i}] := {b}", f0.name).unwrap();
                }
            }
        }
        if let Some(t) = &s.return_term {
            writeln!(out, "  return {t}").unwrap();
        }
        for e in &s.effects {
            writeln!(out, "  effect {e}").unwrap();
        }
    }
    if ex.truncated {
        writeln!(out, "\nexploration truncated").unwrap();
    }
    out
}
