//! Plain-text output for terminals.

use std::fmt::Write;

use termbase::ingest::IngestReport;
use termbase::lexicon::StoreStats;
use termbase::query::{QueryResult, TermDetail};
use termbase::search::MatchKind;
use termbase::senses::{EvalReport, MapReport};

fn instances(n: u64) -> &'static str {
    if n == 1 { "instance" } else { "instances" }
}

/// The five stages of a lookup, one section each.
pub fn query(result: &QueryResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "query: {} [{}] -> {}", result.query, result.lang, result.query_key);

    let _ = writeln!(out, "\n1. candidates");
    if result.candidates.is_empty() {
        let _ = writeln!(out, "   (none)");
    }
    for c in &result.candidates {
        let kind = match c.match_kind {
            MatchKind::Exact => "exact".to_string(),
            MatchKind::Containment => "contains".to_string(),
            MatchKind::Fuzzy => format!("fuzzy d={}", c.edit_distance),
        };
        let _ = writeln!(out, "   {:<32} {:<12} {:>6} {}", c.display_form, kind, c.member_count, instances(c.member_count));
    }

    let _ = writeln!(out, "\n2. term group");
    match &result.matched_group {
        Some(g) => {
            let note = if result.approximate { "  (approximate match)" } else { "" };
            let _ = writeln!(
                out,
                "   {} #{}: {} {}{note}",
                g.display_form, g.term_group_id, g.member_count, instances(g.member_count)
            );
        }
        None => {
            let _ = writeln!(out, "   no matching term");
        }
    }

    let _ = writeln!(out, "\n3. senses");
    for bucket in &result.senses {
        let gloss = bucket.gloss.as_deref().unwrap_or("");
        let _ = writeln!(out, "   {:<16} {:>6}  {gloss}", bucket.label, bucket.instance_count);
    }

    let _ = writeln!(out, "\n4. equivalents");
    for bucket in &result.senses {
        let _ = writeln!(out, "   {}", bucket.label);
        for eq in &bucket.equivalents {
            let dictionaries: Vec<&str> = eq.citations.iter().map(|c| c.dictionary.as_str()).collect();
            let _ = writeln!(out, "     {:<24} {:>6}  {}", eq.display_form, eq.count, dictionaries.join(", "));
        }
    }

    let _ = writeln!(out, "\n5. recommendation");
    let _ = writeln!(out, "   {}", result.recommendation.as_deref().unwrap_or("(none)"));
    out
}

pub fn term_detail(detail: &TermDetail) -> String {
    let g = &detail.group;
    let mut out = format!("{} #{} [{}]: {} {}\n", g.display_form, g.term_group_id, g.lang, g.member_count, instances(g.member_count));
    for row in &detail.entries {
        let _ = writeln!(out, "  #{} {} -> {}  [{}]", row.entry_id, row.source_term, row.target_term, row.sense_label);
        let _ = writeln!(out, "      {}", row.source.citation);
        if let Some(definition) = &row.definition {
            let _ = writeln!(out, "      {definition}");
        }
    }
    out
}

pub fn stats(stats: &StoreStats) -> String {
    format!(
        "entries    {}\nsources    {}\ngroups     {}\nsenses     {}\nmapped     {}\nduplicates {}\n",
        stats.entry_count,
        stats.source_count,
        stats.group_count,
        stats.sense_count,
        stats.mapped_entry_count,
        stats.duplicate_count
    )
}

pub fn ingest(report: &IngestReport) -> String {
    let mut out = format!(
        "read {}  stored {}  duplicates {}  rejected {}\n",
        report.read_count, report.stored_count, report.duplicate_count, report.rejected_count
    );
    for reject in &report.rejects {
        let _ = writeln!(out, "  line {}: {}", reject.line_number, reject.reason);
    }
    out
}

pub fn mapping(report: &MapReport) -> String {
    let mut out = format!(
        "backend {}  mapped {}  low-confidence {}  without senses {}  unmappable {}  failed {}\n",
        report.backend,
        report.mapped,
        report.low_confidence.len(),
        report.without_senses,
        report.unmappable.len(),
        report.failed.len()
    );
    for (entry, reason) in &report.failed {
        let _ = writeln!(out, "  entry {entry}: {reason}");
    }
    out
}

pub fn eval(report: &EvalReport) -> String {
    let mut out = format!("accuracy {:.3} ({}/{})\n", report.accuracy, report.correct, report.total);
    if !report.unknown_entries.is_empty() {
        let _ = writeln!(out, "unknown entries {}", report.unknown_entries.len());
    }
    if !report.unmapped_entries.is_empty() {
        let _ = writeln!(out, "unmapped entries {}", report.unmapped_entries.len());
    }
    for cell in report.confusion.iter().filter(|c| c.gold != c.predicted) {
        let _ = writeln!(out, "  gold {} predicted {}: {}", cell.gold, cell.predicted, cell.count);
    }
    out
}
