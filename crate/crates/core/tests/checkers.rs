use scd_broadcast::checkers::fifo::check_fifo;
use scd_broadcast::checkers::{check_scd_properties, Status, Verdict, Witness};
use scd_broadcast::fixtures::{delivery_pattern, m, negative_example, positive_example};
use scd_broadcast::runner::check;
use scd_broadcast::sim::RunReport;
use scd_broadcast::trace::{Layer, Trace};
use scd_broadcast::verify::CheckOptions;

fn verdict<'a>(verdicts: &'a [Verdict], property: &str) -> &'a Verdict {
    verdicts.iter().find(|v| v.property == property).unwrap_or_else(|| panic!("no {property} verdict"))
}

#[test]
fn positive_pattern_passes_everything() {
    let trace = positive_example();
    for v in check_scd_properties(&trace, Layer::Scd) {
        assert_eq!(v.status, Status::Pass, "{v}");
    }
    let c = check(trace, RunReport::default(), &CheckOptions::default());
    assert!(!c.failed(), "{:?}", c.verdicts);
}

#[test]
fn negative_pattern_names_the_inverted_pair() {
    let verdicts = check_scd_properties(&negative_example(), Layer::Scd);
    let v = verdict(&verdicts, "ms_ordering");
    let Some(Witness::MsOrdering { m: a, m2: b, .. }) = &v.witness else { panic!("{v:?}") };
    let pair = [*a, *b];
    assert!(pair.contains(&m(2)) && pair.contains(&m(3)), "{pair:?}");
}

#[test]
fn same_set_at_every_process_is_fine() {
    let set: &[&[u64]] = &[&[1, 2], &[3]];
    let trace = delivery_pattern(&[set, set, set]);
    assert!(check_scd_properties(&trace, Layer::Scd).iter().all(Verdict::passed));
}

#[test]
fn split_versus_joined_delivery_is_allowed() {
    // {m1},{m2} at one process and {m1,m2} at another do not invert anything.
    let trace = delivery_pattern(&[&[&[1], &[2]], &[&[1, 2]]]);
    assert!(check_scd_properties(&trace, Layer::Scd).iter().all(Verdict::passed));
}

#[test]
fn double_delivery_breaks_integrity() {
    let trace = delivery_pattern(&[&[&[1], &[1]], &[&[1]]]);
    let verdicts = check_scd_properties(&trace, Layer::Scd);
    assert!(verdict(&verdicts, "integrity").failed());
}

#[test]
fn witnesses_survive_a_jsonl_round_trip() {
    let trace = negative_example();
    let text = trace.to_jsonl();
    let back = Trace::read_jsonl(text.as_bytes()).expect("own output parses");
    assert_eq!(check_scd_properties(&trace, Layer::Scd), check_scd_properties(&back, Layer::Scd));
}

#[test]
fn fifo_checker_is_vacuous_on_scd_patterns() {
    for v in check_fifo(&positive_example()) {
        assert!(!v.failed(), "{v}");
    }
}
