mod common;

use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sqlmark::annotate::{build_input, render_relations, AnnotateOptions, AnnotatedInput, Mark, MarkToggles, Segment};
use sqlmark::linking::{Language, LinkAnnotation, LinkTarget, MatchKind, QuestionTokens, Span};
use sqlmark::pipeline::synth::{random_query, random_schema};
use sqlmark::schema::{ColumnType, DatabaseSchema, SchemaBuilder, SchemaGraph};
use sqlmark::sql::{parse_sql, render_sql};

const WORDS: &[&str] = &["how", "many", "show", "name", "a", "b", "2016", "each", "year"];
const VALUES: &[&str] = &["x", "y", "2016", "Chile"];

fn type_mark(t: ColumnType) -> &'static str {
    match t {
        ColumnType::Integer => "Integer",
        ColumnType::Real => "Real",
        ColumnType::Text => "Text",
        ColumnType::Date => "Date",
        ColumnType::Boolean => "Boolean",
        ColumnType::Other => "Other",
    }
}

/// Everything the serialized input is supposed to depend on. Foreign keys
/// only count through the table pairs they connect, links only through
/// their target and kind, the previous query only through its rendering.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Key {
    tables: Vec<String>,
    columns: Vec<(String, bool, &'static str)>,
    table_links: BTreeSet<(usize, usize)>,
    links: BTreeSet<(LinkTarget, MatchKind)>,
    turns: Vec<Vec<String>>,
    prev: Option<String>,
}

fn key(schema: &DatabaseSchema, links: &[LinkAnnotation], turns: &[Vec<String>], prev: Option<&str>) -> Key {
    Key {
        tables: schema.tables().iter().map(|t| t.name.clone()).collect(),
        columns: schema.columns().map(|(id, c)| (schema.qualified_name(id), c.is_primary, type_mark(c.col_type))).collect(),
        table_links: schema
            .foreign_keys()
            .iter()
            .filter(|fk| fk.from.table != fk.to.table)
            .map(|fk| (fk.from.table.min(fk.to.table), fk.from.table.max(fk.to.table)))
            .collect(),
        links: links.iter().map(|l| (l.target.clone(), l.kind)).collect(),
        turns: turns.to_vec(),
        prev: prev.map(str::to_string),
    }
}

fn random_links(rng: &mut impl Rng, schema: &DatabaseSchema) -> Vec<LinkAnnotation> {
    let cols: Vec<_> = schema.columns().map(|(id, _)| id).collect();
    let span = Span { start: 0, end: 1 };
    (0..rng.gen_range(0..4))
        .map(|_| match rng.gen_range(0..3) {
            0 => LinkAnnotation {
                span,
                target: LinkTarget::Table { table: rng.gen_range(0..schema.tables().len()) },
                kind: *[MatchKind::ExactMatch, MatchKind::PartialMatch].choose(rng).unwrap(),
            },
            1 => LinkAnnotation {
                span,
                target: LinkTarget::Column { column: *cols.choose(rng).unwrap() },
                kind: *[MatchKind::ExactMatch, MatchKind::PartialMatch].choose(rng).unwrap(),
            },
            _ => LinkAnnotation {
                span,
                target: LinkTarget::Value {
                    column: *cols.choose(rng).unwrap(),
                    value: VALUES.choose(rng).unwrap().to_string(),
                },
                kind: MatchKind::ValueMatch,
            },
        })
        .collect()
}

fn random_turns(rng: &mut impl Rng) -> Vec<Vec<String>> {
    (0..rng.gen_range(1..=3))
        .map(|_| (0..rng.gen_range(1..=3)).map(|_| WORDS.choose(rng).unwrap().to_string()).collect())
        .collect()
}

#[test]
fn distinct_inputs_serialize_differently() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let schemas: Vec<DatabaseSchema> = (0..4).map(|i| random_schema(&mut rng, &format!("s{i}"))).collect();
    let mut seen: HashMap<Vec<String>, Key> = HashMap::new();
    let mut distinct_keys = BTreeSet::new();
    for case in 0..3000 {
        let schema = schemas.choose(&mut rng).unwrap();
        let links = random_links(&mut rng, schema);
        let turns = random_turns(&mut rng);
        let prev = rng.gen_bool(0.3).then(|| random_query(&mut rng, schema, &SchemaGraph::build(schema)));
        let rendered = prev.as_ref().map(render_sql);
        let k = key(schema, &links, &turns, rendered.as_deref());
        let q = QuestionTokens::from_tokens(turns, Language::En).unwrap();
        let out = build_input(&q, schema, &links, prev.as_ref(), &AnnotateOptions::default()).unwrap();
        distinct_keys.insert(format!("{k:?}"));
        if let Some(other) = seen.insert(out.tokens().to_vec(), k.clone()) {
            assert_eq!(other, k, "case {case}: two inputs share `{}`", out.render());
        }
    }
    assert!(distinct_keys.len() >= 1000, "only {} distinct inputs", distinct_keys.len());
}

fn is_qualified(token: &str, schema: &DatabaseSchema) -> bool {
    let Some((t, c)) = token.split_once('.') else { return false };
    !c.contains('.') && !c.is_empty() && schema.tables().iter().any(|tb| tb.name == t && tb.columns.iter().any(|cd| cd.name == c))
}

/// Column-region tokens that are column names, values dropped.
fn column_tokens(input: &AnnotatedInput) -> Vec<&str> {
    let (toks, segs) = (input.tokens(), input.segments());
    (0..toks.len())
        .filter(|&i| segs[i] == Segment::ColumnRegion)
        .filter(|&i| !(i >= 2 && toks[i - 1] == "&" && segs[i - 1] == Segment::Mark && segs[i - 2] == Segment::ColumnRegion))
        .map(|i| toks[i].as_str())
        .collect()
}

/// Mark runs directly in front of each schema item, `&` separators checked
/// and removed.
fn prefix_runs(input: &AnnotatedInput) -> Vec<(Segment, Vec<&str>)> {
    let (toks, segs) = (input.tokens(), input.segments());
    let mut runs = Vec::new();
    let mut run: Vec<&str> = Vec::new();
    for i in 0..toks.len() {
        match segs[i] {
            Segment::Mark if toks[i] != "[TABLE]" && toks[i] != "[COLUMN]" && toks[i] != "links to" => {
                run.push(&toks[i])
            }
            Segment::TableRegion | Segment::ColumnRegion => {
                // a value behind its column: `& value`
                if run == ["&"] {
                    run.clear();
                    continue;
                }
                let marks: Vec<&str> = run.iter().step_by(2).copied().collect();
                let seps = run.iter().skip(1).step_by(2).all(|s| *s == "&");
                assert!(seps && run.len() % 2 == 1 || run.is_empty(), "bad separators {run:?}");
                runs.push((segs[i], marks));
                run.clear();
            }
            _ => run.clear(),
        }
    }
    runs
}

/// kind* (in kind order), then optionally Primary-Key, then one type for
/// columns; kinds only for tables.
fn accepts(segment: Segment, marks: &[&str]) -> bool {
    const KINDS: [&str; 3] = ["Exact-Match", "Partial-Match", "Value-Match"];
    const TYPES: [&str; 6] = ["Integer", "Real", "Text", "Date", "Boolean", "Other"];
    let mut state = 0; // 0 kinds, 1 after key, 2 after type
    let mut last_kind = None;
    for m in marks {
        if let Some(k) = KINDS.iter().position(|x| x == m) {
            if state != 0 || last_kind.is_some_and(|l| l >= k) {
                return false;
            }
            last_kind = Some(k);
        } else if *m == "Primary-Key" {
            if state != 0 || segment != Segment::ColumnRegion {
                return false;
            }
            state = 1;
        } else if TYPES.contains(m) {
            if state == 2 || segment != Segment::ColumnRegion {
                return false;
            }
            state = 2;
        } else {
            return false;
        }
    }
    segment == Segment::TableRegion || state == 2
}

#[test]
fn mark_grammar_on_the_ranking_example() {
    assert!(accepts(Segment::ColumnRegion, &["Partial-Match", "Primary-Key", "Integer"]));
    assert!(accepts(Segment::ColumnRegion, &["Text"]));
    assert!(!accepts(Segment::ColumnRegion, &["Primary-Key", "Partial-Match", "Integer"]));
    assert!(!accepts(Segment::ColumnRegion, &["Partial-Match", "Exact-Match", "Integer"]));
    assert!(!accepts(Segment::ColumnRegion, &["Partial-Match"]));
    assert!(!accepts(Segment::TableRegion, &["Integer"]));
}

#[test]
fn relations_for_a_chain() {
    let s = SchemaBuilder::new("chain")
        .table("A", &[("id", ColumnType::Integer), ("b", ColumnType::Integer)])
        .table("B", &[("id", ColumnType::Integer), ("c", ColumnType::Integer)])
        .table("C", &[("id", ColumnType::Integer)])
        .foreign_key("A.b", "B.id")
        .foreign_key("B.c", "C.id")
        .build()
        .unwrap();
    let rel = render_relations(&s);
    let statements: BTreeSet<String> = rel.tokens().chunks(3).map(|c| c.join(" ")).collect();
    let want: BTreeSet<String> = s
        .foreign_keys()
        .iter()
        .map(|fk| {
            let (a, b) = (fk.from.table.min(fk.to.table), fk.from.table.max(fk.to.table));
            format!("{} links to {}", s.table(a).name, s.table(b).name)
        })
        .collect();
    assert_eq!(statements, want);
    assert_eq!(statements, BTreeSet::from(["A links to B".to_string(), "B links to C".to_string()]));
    assert_eq!(rel.len(), 6);
}

#[test]
fn previous_query_is_rendered_verbatim() {
    let s = common::fixture("singer");
    let turn1 = parse_sql("SELECT count(*) FROM singer", Some(&s)).unwrap();
    let q = QuestionTokens::from_texts(&["How many singers are there?", "Which of them are from Chile?"], Language::En).unwrap();
    let out = build_input(&q, &s, &[], Some(&turn1), &AnnotateOptions::default()).unwrap();
    assert_eq!(out.region(Segment::PrevSqlRegion).join(" "), render_sql(&turn1));
    let no_discourse = AnnotateOptions { toggles: MarkToggles { discourse: false, ..MarkToggles::default() }, ..Default::default() };
    let out = build_input(&q, &s, &[], Some(&turn1), &no_discourse).unwrap();
    assert!(out.region(Segment::PrevSqlRegion).is_empty());
}

proptest! {
    #[test]
    fn schema_regions_are_well_formed(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let schema = random_schema(&mut rng, "p");
        let links = random_links(&mut rng, &schema);
        let turns = random_turns(&mut rng);
        let q = QuestionTokens::from_tokens(turns.clone(), Language::En).unwrap();
        let out = build_input(&q, &schema, &links, None, &AnnotateOptions::default()).unwrap();

        // one [TABLE] before the tables, one [COLUMN] before the columns
        let count = |m: &str| out.tokens().iter().filter(|t| *t == m).count();
        prop_assert_eq!((count("[TABLE]"), count("[COLUMN]")), (1, 1));
        let t_at = out.tokens().iter().position(|t| t == "[TABLE]").unwrap();
        let c_at = out.tokens().iter().position(|t| t == "[COLUMN]").unwrap();
        let in_place = out.segments().iter().enumerate().all(|(i, s)| match s {
            Segment::TableRegion => t_at < i && i < c_at,
            Segment::ColumnRegion => c_at < i,
            _ => true,
        });
        prop_assert!(in_place);

        // every mark token is from the closed set
        for (t, s) in out.tokens().iter().zip(out.segments()) {
            if *s == Segment::Mark {
                prop_assert!(Mark::parse(t).is_some(), "{}", t);
            }
        }

        // columns are qualified and appear in declaration order
        let cols = column_tokens(&out);
        prop_assert!(cols.iter().all(|c| is_qualified(c, &schema)), "{:?}", cols);
        let want: Vec<String> = schema.columns().map(|(id, _)| schema.qualified_name(id)).collect();
        prop_assert_eq!(cols, want.iter().map(String::as_str).collect::<Vec<_>>());

        for (seg, marks) in prefix_runs(&out) {
            prop_assert!(accepts(seg, &marks), "{:?} {:?}", seg, marks);
        }

        // rendering is single-space joining
        prop_assert_eq!(out.render(), out.tokens().join(" "));

        // stripping leaves question, [TABLE] tables, [COLUMN] columns
        let mut vanilla: Vec<String> = turns.last().unwrap().clone();
        vanilla.push("[TABLE]".into());
        vanilla.extend(schema.tables().iter().map(|t| t.name.clone()));
        vanilla.push("[COLUMN]".into());
        vanilla.extend(want);
        let stripped = out.strip_marks();
        prop_assert_eq!(stripped.tokens(), &vanilla[..]);
        let single = QuestionTokens::from_tokens(vec![turns.last().unwrap().clone()], Language::En).unwrap();
        let plain = AnnotateOptions { toggles: MarkToggles::vanilla(), include_values: true };
        let built = build_input(&single, &schema, &links, None, &plain).unwrap();
        prop_assert_eq!(built.tokens(), &vanilla[..]);
    }

    #[test]
    fn turns_are_newest_first(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let schema = common::fixture("wta_mini");
        let turns = random_turns(&mut rng);
        let q = QuestionTokens::from_tokens(turns.clone(), Language::En).unwrap();
        let out = build_input(&q, &schema, &[], None, &AnnotateOptions::default()).unwrap();
        let mut want: Vec<String> = Vec::new();
        for (i, t) in turns.iter().rev().enumerate() {
            if i > 0 {
                want.push("|".into());
            }
            want.extend(t.iter().cloned());
        }
        let head = out.tokens().iter().position(|t| t == "[TABLE]").unwrap();
        prop_assert_eq!(&out.tokens()[..head], &want[..]);
    }
}
