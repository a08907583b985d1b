use std::path::Path;

use plurvec::analogy::Method;
use plurvec::classify::{evaluate_on_training, read_labeled_vectors, stratified_cv, CvSpec, SmallClassPolicy};
use plurvec::dlcomp::{prepare, semantic_targets, PairInfo, PronLexicon, SemanticSource};
use plurvec::fracss::{apply_map, diagonal_profile, fit_pairs, Direction, LinearMap};
use plurvec::knn::{write_neighbors_csv, Searcher};
use plurvec::pipeline::{
    dl_dataset, pipeline_analogy, pipeline_dl, pipeline_fracss, AnalogyConfig, DlConfig, FracssConfig, Provenance,
    ReportBundle,
};
use plurvec::shifts::{
    class_avg_shifts, export_labeled_vectors, length_groups, shift_stats, write_pairs_tsv, ExportKind, PairSet,
};
use plurvec::stats::{friedman, medians_and_deltas, pairwise_wilcoxon, wilcoxon_signed_rank, Alternative};
use plurvec::synth::{gen_lexicon, gen_linear, gen_synth, pairs_from_matrices, LexiconSpec, LinearSpec, SynthSpec};
use plurvec::{AxisRef, CandidatePool, EmbeddingTable, Metric};
use serde_json::json;

use crate::inputs::{
    json_string, load_table, read_numeric_rows, table_and_pairs, with_pairs, with_table, write_file,
};
use crate::{
    AltArg, AnalogyCmd, ClassifyCmd, Command, DlCmd, DlInputs, EmbedCmd, ExportArg, Failure, FracssCmd, MethodArg,
    ShiftsCmd, SmallClassArg, SourceArg, StatsCmd, SynthCmd, SynthKind,
};

pub fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Embed(c) => embed(c),
        Command::Shifts(c) => shifts(c),
        Command::Analogy(c) => analogy(c),
        Command::Fracss(c) => fracss(c),
        Command::Classify(c) => classify(c),
        Command::Dl(c) => dl(c),
        Command::Stats(c) => stats(c),
        Command::Synth(c) => synth(c),
    }
}

fn finish(bundle: &ReportBundle, out: &Path) -> Result<(), Failure> {
    bundle.write_to(out)?;
    eprintln!("wrote {} file(s) to {}", bundle.files.len(), out.display());
    Ok(())
}

fn text_of(write: impl FnOnce(&mut Vec<u8>) -> plurvec::Result<()>) -> Result<String, Failure> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Failure::Data(e.to_string()))
}

fn embed(cmd: EmbedCmd) -> Result<(), Failure> {
    match cmd {
        EmbedCmd::Load { table, out } => {
            let t = load_table(&table)?;
            println!(
                "{}",
                json!({ "words": t.len(), "dim": t.dim(), "normalized": table.normalize })
            );
            if let Some(out) = out {
                t.save(&out)?;
            }
            Ok(())
        }
    }
}

fn shifts(cmd: ShiftsCmd) -> Result<(), Failure> {
    match cmd {
        ShiftsCmd::Stats { pairs, axis, out } => {
            let (table, set) = table_and_pairs(&pairs)?;
            let axis = match axis {
                Some(i) => AxisRef::new(table.dim(), i)?,
                None => AxisRef::last(table.dim())?,
            };
            let prov = with_pairs(
                Provenance::new("shifts stats", None, &json!({ "axis": axis.index() }))?,
                &pairs,
            )?;
            let stats = shift_stats(&set, &table, axis)?;
            let groups = length_groups(&stats);
            let mut bundle = ReportBundle::new(prov);
            bundle.add_csv("pairs.csv", |w| stats.write_pairs_csv(w, &set, &table))?;
            bundle.add_csv("summary.csv", |w| stats.write_summary_csv(w))?;
            let lengths = if set.len() >= 2 {
                json!({
                    "groups": ["singular", "plural", "shift"],
                    "medians": medians_and_deltas(&groups)?,
                    "friedman": friedman(&groups)?,
                    "pairwise_wilcoxon": pairwise_wilcoxon(&groups, Alternative::TwoSided)?,
                })
            } else {
                serde_json::Value::Null
            };
            bundle.set_summary(json!({
                "pairs": set.len(),
                "axis": axis.index(),
                "singular_len": stats.singular_len,
                "plural_len": stats.plural_len,
                "shift_len": stats.shift_len,
                "singular_angle": stats.singular_angle,
                "plural_angle": stats.plural_angle,
                "shift_angle": stats.shift_angle,
                "undefined_shift_angles": stats.undefined_shift_angles,
                "length_tests": lengths,
            }))?;
            finish(&bundle, &out)
        }
        ShiftsCmd::Classavg {
            pairs,
            min_class_size,
            out,
        } => {
            let (table, set) = table_and_pairs(&pairs)?;
            let prov = with_pairs(
                Provenance::new("shifts classavg", None, &json!({ "min_class_size": min_class_size }))?,
                &pairs,
            )?;
            let classes = class_avg_shifts(&set, &table, min_class_size)?;
            let mut bundle = ReportBundle::new(prov);
            bundle.add_csv("classes.csv", |w| classes.write_csv(w))?;
            let labels: Vec<String> = classes.classes.keys().cloned().collect();
            let rows: Vec<Vec<f64>> = classes
                .classes
                .values()
                .map(|c| c.shift.clone())
                .collect();
            let shifts = EmbeddingTable::from_rows(labels, rows)?;
            bundle.add_text("shifts.txt", text_of(|w| shifts.write(w))?);
            let skipped: Vec<_> = classes.under_threshold().map(|(c, n)| json!({ "class": c, "count": n })).collect();
            bundle.set_summary(json!({
                "pairs": set.len(),
                "classes": classes.classes.len(),
                "min_class_size": min_class_size,
                "under_threshold": skipped,
            }))?;
            finish(&bundle, &out)
        }
        ShiftsCmd::ExportTsneInput { pairs, kind, out } => {
            let (table, set) = table_and_pairs(&pairs)?;
            let kind = match kind {
                ExportArg::Shift => ExportKind::Shift,
                ExportArg::Singular => ExportKind::Singular,
                ExportArg::Plural => ExportKind::Plural,
            };
            let text = text_of(|w| export_labeled_vectors(w, &set, &table, kind))?;
            write_file(&out, &text)
        }
    }
}

fn analogy(cmd: AnalogyCmd) -> Result<(), Failure> {
    let AnalogyCmd::Evaluate {
        pairs,
        method,
        prime,
        eval,
        min_class_size,
        filter_singulars,
        out,
    } = cmd;
    let prime = match prime.as_deref().map(|p| p.split_once(',')) {
        None => None,
        Some(Some((sg, pl))) if !sg.is_empty() && !pl.is_empty() && !pl.contains(',') => {
            Some((sg.to_owned(), pl.to_owned()))
        }
        Some(_) => return Err(Failure::Usage("--prime takes exactly `singular,plural`".into())),
    };
    let methods = match method {
        MethodArg::OnlyB => vec![Method::OnlyB],
        MethodArg::ThreeCosAdd => {
            if prime.is_none() {
                return Err(Failure::Usage("3cosadd needs --prime singular,plural".into()));
            }
            vec![Method::ThreeCosAdd]
        }
        MethodArg::ThreeCosAvg => vec![Method::ThreeCosAvg],
        MethodArg::CosClassAvg => vec![Method::CosClassAvg],
        MethodArg::All if prime.is_some() => Method::ALL.to_vec(),
        MethodArg::All => vec![Method::OnlyB, Method::ThreeCosAvg, Method::CosClassAvg],
    };
    let config = AnalogyConfig {
        methods,
        metric: eval.metric.into(),
        topn: eval.topn,
        min_class_size,
        filter_singulars,
        prime,
    };
    let (table, set) = table_and_pairs(&pairs)?;
    let prov = with_pairs(Provenance::new("analogy evaluate", None, &config)?, &pairs)?;
    let bundle = pipeline_analogy(&table, &set, &config, prov)?;
    if let Some(topn) = bundle.get("topn.csv") {
        print!("{}", plurvec::pipeline::strip_provenance(topn));
    }
    finish(&bundle, &out)
}

fn fit_and_save(pairs: &crate::PairArgs, ridge: f64, direction: Direction, out: &Path) -> Result<(), Failure> {
    let (table, set) = table_and_pairs(pairs)?;
    let map = fit_pairs(&set, &table, ridge, direction)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    }
    map.save(out)?;
    if map.d_in() == map.d_out() {
        println!("{}", serde_json::to_string(&diagonal_profile(&map)?).map_err(|e| Failure::Data(e.to_string()))?);
    }
    Ok(())
}

fn fracss(cmd: FracssCmd) -> Result<(), Failure> {
    match cmd {
        FracssCmd::Fit { pairs, ridge, out } => fit_and_save(&pairs, ridge, Direction::Forward, &out),
        FracssCmd::Invert { pairs, ridge, out } => fit_and_save(&pairs, ridge, Direction::Inverse, &out),
        FracssCmd::Apply {
            map,
            table,
            words,
            out,
            neighbors,
            metric,
        } => {
            let map = LinearMap::<f64>::load(&map)?;
            let t = load_table(&table)?;
            let words: Vec<String> = if words.is_empty() {
                t.words().to_vec()
            } else {
                words
            };
            let rows = words
                .iter()
                .map(|w| apply_map(&map, t.vector(w)?))
                .collect::<plurvec::Result<Vec<_>>>()?;
            let mapped = EmbeddingTable::from_rows(words.clone(), rows)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
            }
            mapped.save(&out)?;
            if let Some(k) = neighbors {
                if mapped.dim() != t.dim() {
                    return Err(Failure::Usage("neighbours need a map into the table's own space".into()));
                }
                let searcher = Searcher::new(&t, Metric::from(metric));
                let pool = CandidatePool::all(t.len());
                let lists = words
                    .iter()
                    .enumerate()
                    .map(|(i, w)| Ok((w.clone(), searcher.top_k(mapped.row(i), k, &pool)?)))
                    .collect::<plurvec::Result<Vec<_>>>()?;
                print!("{}", text_of(|w| write_neighbors_csv(w, &t, &lists))?);
            }
            Ok(())
        }
        FracssCmd::Profile { map } => {
            let map = LinearMap::<f64>::load(&map)?;
            print!("{}", json_string(&diagonal_profile(&map)?)?);
            Ok(())
        }
        FracssCmd::Evaluate {
            pairs,
            seed,
            ridge,
            test_fraction,
            metric,
            topn,
            filter_sources,
            out,
        } => {
            let config = FracssConfig {
                seed,
                metric: metric.into(),
                topn,
                ridge,
                test_fraction,
                filter_sources,
            };
            let (table, set) = table_and_pairs(&pairs)?;
            let prov = with_pairs(Provenance::new("fracss evaluate", Some(seed), &config)?, &pairs)?;
            let bundle = pipeline_fracss(&table, &set, &config, prov)?;
            if let Some(e) = bundle.get("evaluation.csv") {
                print!("{}", plurvec::pipeline::strip_provenance(e));
            }
            finish(&bundle, &out)
        }
    }
}

fn classify(cmd: ClassifyCmd) -> Result<(), Failure> {
    let ClassifyCmd::Lda {
        vectors,
        labels,
        shrinkage,
        folds,
        seed,
        unstratified,
        small_classes,
        train_eval,
        out,
    } = cmd;
    let data = read_labeled_vectors::<f64>(&vectors, labels)?;
    let spec = CvSpec {
        k: folds,
        seed,
        stratified: !unstratified,
    };
    let policy = match small_classes {
        SmallClassArg::Strict => SmallClassPolicy::Strict,
        SmallClassArg::Drop => SmallClassPolicy::Drop,
    };
    let config = json!({
        "label_column": labels,
        "shrinkage": shrinkage,
        "folds": folds,
        "stratified": !unstratified,
        "small_classes": format!("{policy:?}").to_lowercase(),
        "train_eval": train_eval,
    });
    let prov = Provenance::new("classify lda", Some(seed), &config)?.with_file("vectors", &vectors)?;
    let mut bundle = ReportBundle::new(prov);
    if train_eval {
        let eval = evaluate_on_training(&data.vectors, &data.labels, shrinkage)?;
        bundle.set_summary(json!({ "samples": data.vectors.len(), "training": eval }))?;
    } else {
        let report = stratified_cv(&data.vectors, &data.labels, spec, shrinkage, policy)?;
        bundle.add_csv("folds.csv", |w| report.write_csv(w))?;
        bundle.set_summary(json!({ "samples": data.vectors.len(), "cv": report }))?;
    }
    if let Some(s) = bundle.get("report.json") {
        print!("{s}");
    }
    finish(&bundle, &out)
}

struct DlData {
    lexicon: PronLexicon,
    info: PairInfo,
    table: EmbeddingTable,
    pairs: Option<PairSet>,
}

fn load_dl(inputs: &DlInputs) -> Result<DlData, Failure> {
    let lexicon = PronLexicon::load(&inputs.lexicon)?;
    let info = PairInfo::load(&inputs.pair_info)?;
    let table = load_table(&inputs.table)?;
    let pairs = match &inputs.pairs {
        Some(p) => Some(crate::inputs::load_pairs(
            &table,
            &crate::PairArgs {
                table: inputs.table.clone(),
                pairs: p.clone(),
                skip_missing: true,
            },
        )?),
        None => None,
    };
    Ok(DlData {
        lexicon,
        info,
        table,
        pairs,
    })
}

fn dl_provenance(command: &str, inputs: &DlInputs, config: &impl serde::Serialize) -> Result<Provenance, Failure> {
    let mut p = Provenance::new(command, Some(inputs.seed), config)?
        .with_file("lexicon", &inputs.lexicon)?
        .with_file("pair_info", &inputs.pair_info)?;
    p = with_table(p, &inputs.table)?;
    if let Some(pairs) = &inputs.pairs {
        p = p.with_file("pairs", pairs)?;
    }
    Ok(p)
}

fn sources_of(arg: SourceArg) -> Vec<SemanticSource> {
    match arg {
        SourceArg::Raw => vec![SemanticSource::Raw],
        SourceArg::Cosclassavg => vec![SemanticSource::CosClassAvg],
        SourceArg::Fracss => vec![SemanticSource::Fracss],
        SourceArg::All => SemanticSource::ALL.to_vec(),
    }
}

fn dl(cmd: DlCmd) -> Result<(), Failure> {
    match cmd {
        DlCmd::Split { inputs, out } => {
            let data = load_dl(&inputs)?;
            let (info, dropped) = dl_dataset(&data.info, &data.lexicon, &data.table);
            let split = plurvec::dlcomp::make_split(&info, inputs.seed, inputs.train_fraction)?;
            let prov = dl_provenance(
                "dl split",
                &inputs,
                &json!({ "train_fraction": inputs.train_fraction }),
            )?;
            let mut bundle = ReportBundle::new(prov);
            bundle.add_text("split.tsv", text_of(|w| split.write_tsv(w, &info))?);
            bundle.set_summary(json!({ "words": info.len(), "dropped": dropped }))?;
            finish(&bundle, &out)
        }
        DlCmd::Fit {
            inputs,
            source,
            ridge,
            min_class_size,
            out,
        } => {
            let sources = sources_of(source);
            if sources.len() != 1 {
                return Err(Failure::Usage("dl fit takes a single --source".into()));
            }
            let data = load_dl(&inputs)?;
            let (info, dropped) = dl_dataset(&data.info, &data.lexicon, &data.table);
            if info.is_empty() {
                return Err(Failure::Usage("no words with both a pronunciation and an embedding".into()));
            }
            let setup = prepare(&data.lexicon, &info, inputs.seed, inputs.train_fraction)?;
            let targets = semantic_targets(
                sources[0],
                &info,
                &data.table,
                data.pairs.as_ref(),
                min_class_size,
                ridge,
            )?;
            let c = setup.form.dense::<f64>(&setup.train_rows);
            let s = plurvec::dlcomp::semantic_rows(&setup.form, &setup.train_rows, &targets.table)?;
            let map = plurvec::dlcomp::fit_comprehension(&c, &s, ridge)?;
            let config = json!({
                "source": sources[0],
                "ridge": ridge,
                "min_class_size": min_class_size,
                "train_fraction": inputs.train_fraction,
            });
            let mut bundle = ReportBundle::new(dl_provenance("dl fit", &inputs, &config)?);
            bundle.add_text("map.txt", text_of(|w| map.write(w))?);
            bundle.add_text("triphones.txt", setup.space.names().join("\n") + "\n");
            bundle.add_text("split.tsv", text_of(|w| setup.split.write_tsv(w, &info))?);
            bundle.set_summary(json!({
                "words": info.len(),
                "dropped": dropped,
                "train_tokens": setup.train_rows.len(),
                "test_tokens": setup.test_rows.len(),
                "triphones": setup.space.len(),
                "raw_fallbacks": targets.raw_fallbacks,
            }))?;
            finish(&bundle, &out)
        }
        DlCmd::Evaluate {
            inputs,
            source,
            ridge,
            min_class_size,
            metric,
            topn,
            out,
        } => {
            let config = DlConfig {
                seed: inputs.seed,
                metric: metric.into(),
                topn,
                ridge,
                train_fraction: inputs.train_fraction,
                min_class_size,
                sources: sources_of(source),
            };
            let data = load_dl(&inputs)?;
            let prov = dl_provenance("dl evaluate", &inputs, &config)?;
            let bundle = pipeline_dl(&data.info, &data.lexicon, &data.table, data.pairs.as_ref(), &config, prov)?;
            if let Some(a) = bundle.get("accuracy.csv") {
                print!("{}", plurvec::pipeline::strip_provenance(a));
            }
            finish(&bundle, &out)
        }
    }
}

fn stats(cmd: StatsCmd) -> Result<(), Failure> {
    match cmd {
        StatsCmd::Wilcoxon { input, alternative } => {
            let rows = read_numeric_rows(&input)?;
            let diffs: Vec<f64> = match rows[0].len() {
                1 => rows.iter().map(|r| r[0]).collect(),
                2 => rows.iter().map(|r| r[0] - r[1]).collect(),
                n => return Err(Failure::Usage(format!("expected 1 or 2 columns, found {n}"))),
            };
            let alt = match alternative {
                AltArg::TwoSided => Alternative::TwoSided,
                AltArg::Greater => Alternative::Greater,
                AltArg::Less => Alternative::Less,
            };
            print!("{}", json_string(&wilcoxon_signed_rank(&diffs, alt)?)?);
            Ok(())
        }
        StatsCmd::Friedman { input } => {
            let rows = read_numeric_rows(&input)?;
            let k = rows[0].len();
            let groups: Vec<Vec<f64>> = (0..k).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
            print!("{}", json_string(&friedman(&groups)?)?);
            Ok(())
        }
    }
}

fn synth(cmd: SynthCmd) -> Result<(), Failure> {
    let SynthCmd::Gen {
        kind,
        seed,
        classes,
        lexemes,
        dim,
        shift_scale,
        sigma_lexeme,
        sigma,
        rows,
        out,
    } = cmd;
    let class_spec = SynthSpec {
        classes,
        lexemes_per_class: lexemes,
        dim,
        shift_scale,
        sigma_lexeme,
        sigma,
        seed,
        ..SynthSpec::default()
    };
    let bundle = match kind {
        SynthKind::Classes => {
            let data = gen_synth::<f64>(&class_spec)?;
            let mut b = ReportBundle::new(Provenance::new("synth gen classes", Some(seed), &class_spec)?);
            b.add_text("embeddings.txt", text_of(|w| data.table.write(w))?);
            b.add_text("pairs.tsv", text_of(|w| write_pairs_tsv(w, &data.pairs, &data.table))?);
            b.set_summary(json!({ "words": data.table.len(), "pairs": data.pairs.len(), "classes": data.shifts.len() }))?;
            b
        }
        SynthKind::Linear => {
            let spec = LinearSpec {
                rows,
                dim,
                seed,
                ..LinearSpec::default()
            };
            let (x, y) = gen_linear::<f64>(&spec)?;
            let (table, pairs) = pairs_from_matrices(&x, &y)?;
            let mut b = ReportBundle::new(Provenance::new("synth gen linear", Some(seed), &spec)?);
            b.add_text("embeddings.txt", text_of(|w| table.write(w))?);
            b.add_text("pairs.tsv", text_of(|w| write_pairs_tsv(w, &pairs, &table))?);
            b.set_summary(json!({ "words": table.len(), "pairs": pairs.len() }))?;
            b
        }
        SynthKind::Lexicon => {
            let base = LexiconSpec::default();
            let spec = LexiconSpec {
                semantics: SynthSpec {
                    seed,
                    ..base.semantics.clone()
                },
                ..base
            };
            let data = gen_lexicon::<f64>(&spec)?;
            let mut b = ReportBundle::new(Provenance::new("synth gen lexicon", Some(seed), &spec)?);
            b.add_text("lexicon.tsv", text_of(|w| data.lexicon.write(w))?);
            b.add_text("pair_info.tsv", text_of(|w| data.info.write(w))?);
            b.add_text("embeddings.txt", text_of(|w| data.embeddings.write(w))?);
            b.add_text("pairs.tsv", text_of(|w| write_pairs_tsv(w, &data.pairs, &data.embeddings))?);
            b.set_summary(json!({
                "words": data.info.len(),
                "pronunciations": data.lexicon.len(),
                "pairs": data.pairs.len(),
            }))?;
            b
        }
    };
    finish(&bundle, &out)
}
