use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lungrad_core::learn::{self, CvResult, PValueMatrix, TTestMode};
use lungrad_core::maskio::{self, CaseEntry, CohortManifest, FeatureTable, NrrdEncoding, PredKind};
use lungrad_core::radiomics::{self, FeatureVector};
use lungrad_core::segeval::{self, CaseEvaluation, CohortReport, ReviewOutcome};
use lungrad_core::segpost::{self, Component};
use lungrad_core::synth::{self, PhantomSpec};
use lungrad_core::{Error, LabelMask, ProbabilityMap, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::{Command, Context, EnsembleArgs, EvaluateArgs, FeaturesArgs, ManifestArgs, MaskSource, PhantomArgs, ReportArgs, SurviveArgs, SurviveMode};

pub fn dispatch(cmd: &Command, ctx: &Context) -> Result<()> {
    match cmd {
        Command::Phantom(a) => phantom(a, ctx),
        Command::Ensemble(a) => ensemble(a, ctx),
        Command::Postprocess(a) => postprocess(a, ctx),
        Command::Evaluate(a) => evaluate(a, ctx),
        Command::Review(a) => review(a, ctx),
        Command::Features(a) => features(a, ctx),
        Command::Survive(a) => survive(a, ctx),
        Command::Report(a) => report(a, ctx),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn sorted_cases(m: &CohortManifest) -> Vec<&CaseEntry> {
    let mut cases: Vec<&CaseEntry> = m.cases.iter().collect();
    cases.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    cases
}

fn read_manifest(path: &Path) -> Result<CohortManifest> {
    maskio::read_manifest(path, true)
}

/// Average of every model output listed for the case; masks count as 0/1
/// probabilities.
fn case_ensemble(case: &CaseEntry) -> Result<ProbabilityMap> {
    if case.pred.is_empty() {
        return Err(Error::Manifest(format!("case {:?} lists no predictions", case.case_id)));
    }
    let maps = case
        .pred
        .iter()
        .map(|p| match p.kind {
            PredKind::Prob => maskio::read_probability(&p.path),
            PredKind::Mask => maskio::read_mask(&p.path).map(|m| ProbabilityMap::from(&m)),
        })
        .collect::<Result<Vec<_>>>()?;
    segpost::ensemble_average(&maps)
}

fn case_binary(case: &CaseEntry, ctx: &Context) -> Result<LabelMask> {
    segpost::binarize(&case_ensemble(case)?, ctx.config.postproc.threshold)
}

// ---------------------------------------------------------------------------

fn phantom(a: &PhantomArgs, ctx: &Context) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            PhantomSpec::from_toml(&text)?
        }
        None => PhantomSpec::default(),
    };
    if let Some(v) = a.volume_min {
        spec.volume_range_cm3[0] = v;
    }
    if let Some(v) = a.volume_max {
        spec.volume_range_cm3[1] = v;
    }
    if let Some(f) = a.fraction_below {
        spec.fraction_below_03 = f;
    }
    if let Some(t) = a.texture {
        spec.texture = t.into();
    }
    let cohort = synth::gen_cohort(a.n, &spec, ctx.seed, &ctx.out)?;
    let below = cohort.truth.iter().filter(|t| t.below_review_threshold).count();
    println!(
        "wrote {} cases ({below} below DICE 0.3) to {}",
        cohort.truth.len(),
        cohort.manifest_path.display()
    );
    Ok(())
}

fn ensemble(a: &EnsembleArgs, ctx: &Context) -> Result<()> {
    if let Some(manifest) = &a.manifest {
        let m = read_manifest(manifest)?;
        ensure_dir(&ctx.out)?;
        let rows = sorted_cases(&m)
            .par_iter()
            .map(|case| {
                let avg = case_ensemble(case)?;
                let file = format!("{}_ensemble_prob.nrrd", case.case_id);
                maskio::write_nrrd(&avg, ctx.out.join(&file), NrrdEncoding::Gzip)?;
                Ok(json!({"case_id": case.case_id, "n_models": case.pred.len(), "file": file}))
            })
            .collect::<Result<Vec<_>>>()?;
        write_json(
            &ctx.out.join("ensemble.json"),
            &json!({"config_hash": ctx.config_hash, "cases": rows}),
        )?;
        println!("averaged {} cases", rows.len());
    } else {
        let maps = a
            .input
            .iter()
            .map(maskio::read_probability)
            .collect::<Result<Vec<_>>>()?;
        let avg = segpost::ensemble_average(&maps)?;
        let out = a.output.as_ref().expect("clap enforces --output");
        maskio::write_nrrd(&avg, out, NrrdEncoding::Gzip)?;
        println!("averaged {} maps into {}", maps.len(), out.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct PostprocessCase {
    case_id: String,
    labels_file: String,
    candidate_files: Vec<String>,
    components: Vec<Component>,
}

fn postprocess(a: &ManifestArgs, ctx: &Context) -> Result<()> {
    let m = read_manifest(&a.manifest)?;
    ensure_dir(&ctx.out)?;
    let conn = ctx.config.postproc.connectivity;
    let cases = sorted_cases(&m)
        .par_iter()
        .map(|case| {
            let cs = segpost::connected_components(&case_binary(case, ctx)?, conn);
            let labels_file = format!("{}_labels.nrrd", case.case_id);
            maskio::write_nrrd(&segpost::label_grid(&cs)?, ctx.out.join(&labels_file), NrrdEncoding::Gzip)?;
            let mut candidate_files = Vec::new();
            for (rank, mask) in segpost::rank_by_volume(&cs).iter().enumerate() {
                let f = format!("{}_cand{}.nrrd", case.case_id, rank + 1);
                maskio::write_nrrd(mask, ctx.out.join(&f), NrrdEncoding::Gzip)?;
                candidate_files.push(f);
            }
            Ok(PostprocessCase {
                case_id: case.case_id.clone(),
                labels_file,
                candidate_files,
                components: cs.components,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(
        &ctx.out.join("postprocess.json"),
        &json!({
            "config_hash": ctx.config_hash,
            "connectivity": conn.value(),
            "threshold": ctx.config.postproc.threshold,
            "cases": cases,
        }),
    )?;
    println!("labelled {} cases", cases.len());
    Ok(())
}

fn evaluate(a: &EvaluateArgs, ctx: &Context) -> Result<()> {
    let m = read_manifest(&a.manifest)?;
    let conn = ctx.config.postproc.connectivity;
    let evals = sorted_cases(&m)
        .par_iter()
        .map(|case| {
            let pred = segpost::largest_component(&case_binary(case, ctx)?, conn);
            let reference = maskio::read_mask(&case.ref_mask)?;
            CaseEvaluation::compute(&case.case_id, &pred, &reference)
        })
        .collect::<Result<Vec<_>>>()?;
    let cohort = segeval::cohort_stats(&evals)?;
    let path = a.report.clone().unwrap_or_else(|| ctx.out.join("evaluation.json"));
    write_json(
        &path,
        &json!({
            "config_hash": ctx.config_hash,
            "table_header": CohortReport::TABLE_HEADER,
            "table_row": cohort.table_row(),
            "cohort": cohort,
            "cases": evals,
        }),
    )?;
    println!("{}\n{}", CohortReport::TABLE_HEADER, cohort.table_row());
    Ok(())
}

#[derive(Serialize)]
struct ReviewCase {
    case_id: String,
    n_candidates: usize,
    outcome: ReviewOutcome,
}

fn review(a: &ManifestArgs, ctx: &Context) -> Result<()> {
    let m = read_manifest(&a.manifest)?;
    let conn = ctx.config.postproc.connectivity;
    let min_dice = ctx.config.review.min_dice;
    let results = sorted_cases(&m)
        .par_iter()
        .map(|case| {
            let cs = segpost::connected_components(&case_binary(case, ctx)?, conn);
            let candidates = segpost::rank_by_volume(&cs);
            let reference = maskio::read_mask(&case.ref_mask)?;
            let outcome = segeval::simulate_review(&candidates, &reference, min_dice)?;
            // Accepted cases are re-scored on the component the reviewer kept.
            let eval = match &outcome.selected_component {
                Some(s) if outcome.accepted() => Some(CaseEvaluation::compute(&case.case_id, &candidates[s.rank], &reference)?),
                _ => None,
            };
            Ok((
                ReviewCase {
                    case_id: case.case_id.clone(),
                    n_candidates: candidates.len(),
                    outcome,
                },
                eval,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let accepted: Vec<CaseEvaluation> = results.iter().filter_map(|(_, e)| e.clone()).collect();
    let rejected: Vec<&str> = results
        .iter()
        .filter(|(r, _)| !r.outcome.accepted())
        .map(|(r, _)| r.case_id.as_str())
        .collect();
    let post_review = if accepted.is_empty() { None } else { Some(segeval::cohort_stats(&accepted)?) };
    ensure_dir(&ctx.out)?;
    write_json(
        &ctx.out.join("review.json"),
        &json!({
            "config_hash": ctx.config_hash,
            "min_dice": min_dice,
            "n_accepted": accepted.len(),
            "n_rejected": rejected.len(),
            "rejected_case_ids": rejected,
            "post_review": post_review,
            "cases": results.iter().map(|(r, _)| r).collect::<Vec<_>>(),
        }),
    )?;
    println!("accepted {} of {} cases", accepted.len(), results.len());
    Ok(())
}

fn features(a: &FeaturesArgs, ctx: &Context) -> Result<()> {
    let m = read_manifest(&a.manifest)?;
    let conn = ctx.config.postproc.connectivity;
    let cfg = &ctx.config.extract;
    let vectors: Vec<(String, FeatureVector)> = sorted_cases(&m)
        .par_iter()
        .map(|case| {
            let image = maskio::read_volume(&case.image)?;
            let mask = match a.mask {
                MaskSource::Ref => maskio::read_mask(&case.ref_mask)?,
                MaskSource::Auto => segpost::largest_component(&case_binary(case, ctx)?, conn),
            };
            let fv = radiomics::extract_all(&image, &mask, cfg).map_err(|e| match e {
                Error::EmptyRoi => Error::Validation(format!("case {:?}: empty ROI", case.case_id)),
                other => other,
            })?;
            Ok((case.case_id.clone(), fv))
        })
        .collect::<Result<_>>()?;
    let mut table = FeatureTable::new(radiomics::feature_names())?;
    for (id, fv) in &vectors {
        table.push(id.clone(), fv.values.clone())?;
    }
    let csv = a.csv.clone().unwrap_or_else(|| ctx.out.join("features.csv"));
    if let Some(parent) = csv.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    maskio::write_feature_table(&table, &csv)?;
    let meta_path = csv.with_extension("json");
    write_json(
        &meta_path,
        &json!({
            "config_hash": ctx.config_hash,
            "extraction_hash": cfg.hash(),
            "mask_source": format!("{:?}", a.mask).to_lowercase(),
            "cases": vectors.iter().map(|(id, fv)| json!({
                "case_id": id,
                "n_slices_used": fv.n_slices_used,
                "degenerate": fv.degenerate,
            })).collect::<Vec<_>>(),
        }),
    )?;
    write_text(&csv.with_file_name("feature_catalog.csv"), &radiomics::catalog_csv())?;
    println!("extracted {} features for {} cases into {}", table.columns().len(), vectors.len(), csv.display());
    Ok(())
}

struct LearningData {
    case_ids: Vec<String>,
    x: Vec<Vec<f64>>,
    y: Vec<u8>,
    names: Vec<String>,
}

/// Feature matrix and labels aligned by case id. Columns with any non-finite
/// value are dropped.
fn learning_data(table: &FeatureTable, m: &CohortManifest, threshold: f64) -> Result<LearningData> {
    let keep: Vec<usize> = (0..table.columns().len())
        .filter(|&j| table.rows().iter().all(|r| r.values[j].is_finite()))
        .collect();
    let dropped = table.columns().len() - keep.len();
    if dropped > 0 {
        eprintln!("note: dropped {dropped} feature columns with non-finite values");
    }
    if keep.is_empty() {
        return Err(Error::FeatureTable("no finite feature columns".into()));
    }
    let mut ids = Vec::new();
    let mut x = Vec::new();
    let mut months = Vec::new();
    for row in table.rows() {
        let case = m
            .find(&row.case_id)
            .ok_or_else(|| Error::Manifest(format!("case {:?} not in manifest", row.case_id)))?;
        let s = case
            .survival_months
            .ok_or_else(|| Error::Manifest(format!("case {:?} has no survival_months", row.case_id)))?;
        ids.push(row.case_id.clone());
        x.push(keep.iter().map(|&j| row.values[j]).collect());
        months.push(s);
    }
    let y = learn::dichotomize_survival(&months, threshold)?;
    let names = keep.iter().map(|&j| table.columns()[j].clone()).collect();
    Ok(LearningData {
        case_ids: ids,
        x,
        y,
        names,
    })
}

fn sorted_table(path: &Path) -> Result<FeatureTable> {
    let mut t = maskio::read_feature_table(path)?;
    t.sort_by_case_id();
    Ok(t)
}

fn survive(a: &SurviveArgs, ctx: &Context) -> Result<()> {
    let m = maskio::read_manifest(&a.manifest, false)?;
    let lc = &ctx.config.learn;
    let mut params = lc.forest_params(ctx.seed);
    if let Some(n) = a.n_trees {
        params.n_trees = n;
    }
    let k = a.k.unwrap_or(lc.k);
    let mode: TTestMode = a.ttest.map(Into::into).unwrap_or(lc.ttest);
    ensure_dir(&ctx.out)?;
    match a.mode {
        SurviveMode::Cv | SurviveMode::Search => {
            let tables = a.features.iter().map(|p| sorted_table(p)).collect::<Result<Vec<_>>>()?;
            let table = learn::join_feature_tables(&tables)?;
            let LearningData { case_ids: ids, x, y, names } = learning_data(&table, &m, lc.survival_threshold_months)?;
            if a.mode == SurviveMode::Search {
                let ranked = learn::random_search(&x, &y, &lc.search, &params, k, ctx.seed)?;
                write_json(
                    &ctx.out.join("search.json"),
                    &json!({"config_hash": ctx.config_hash, "results": ranked}),
                )?;
                if let Some(best) = ranked.first() {
                    println!(
                        "best of {}: n_trees {} ccp_alpha {:.4} max_features {} mean accuracy {:.3}",
                        ranked.len(),
                        best.cv.params.n_trees,
                        best.cv.params.ccp_alpha,
                        best.cv.params.max_features,
                        best.cv.mean
                    );
                }
                return Ok(());
            }
            let cv = learn::cross_validate(&x, &y, &params, k, ctx.seed)?;
            let model = learn::fit_forest_named(&x, &y, &params, names)?;
            let preds = model.predict(&x)?;
            let mut csv = String::from("case_id,label,cv_prediction,model_prediction,vote_1\n");
            for (i, id) in ids.iter().enumerate() {
                csv.push_str(&format!("{id},{},{},{},{}\n", y[i], cv.predictions[i], preds[i].label, preds[i].votes[1]));
            }
            write_text(&ctx.out.join("predictions.csv"), &csv)?;
            write_text(&ctx.out.join("model.json"), &(model.to_json()? + "\n"))?;
            write_json(&ctx.out.join("cv.json"), &json!({"config_hash": ctx.config_hash, "cv": cv}))?;
            println!("{k}-fold mean accuracy {:.3}", cv.mean);
        }
        SurviveMode::Compare => {
            if !a.names.is_empty() && a.names.len() != a.features.len() {
                return Err(Error::invalid(format!("{} names for {} feature files", a.names.len(), a.features.len())));
            }
            let mut groups = Vec::new();
            let mut results: Vec<(String, CvResult)> = Vec::new();
            for (i, p) in a.features.iter().enumerate() {
                let name = a
                    .names
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
                let LearningData { x, y, .. } = learning_data(&sorted_table(p)?, &m, lc.survival_threshold_months)?;
                let cv = learn::cross_validate(&x, &y, &params, k, ctx.seed)?;
                groups.push((name.clone(), cv.fold_accuracies.clone()));
                results.push((name, cv));
            }
            let matrix = PValueMatrix::compute(&groups, mode)?;
            write_text(&ctx.out.join("pvalues.csv"), &matrix.to_csv())?;
            write_json(&ctx.out.join("pvalues.json"), &json!({"config_hash": ctx.config_hash, "matrix": matrix}))?;
            let summary: BTreeMap<&str, &CvResult> = results.iter().map(|(n, c)| (n.as_str(), c)).collect();
            write_json(&ctx.out.join("compare.json"), &json!({"config_hash": ctx.config_hash, "groups": summary}))?;
            for (n, c) in &results {
                println!("{n}: mean accuracy {:.3}", c.mean);
            }
        }
    }
    Ok(())
}

fn report(a: &ReportArgs, ctx: &Context) -> Result<()> {
    let mut sections = BTreeMap::new();
    for p in &a.inputs {
        let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
        let v: Value = serde_json::from_str(&text)?;
        let key = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| file_name(p));
        if sections.insert(key.clone(), v).is_some() {
            return Err(Error::invalid(format!("two inputs share the name {key:?}")));
        }
    }
    let out: PathBuf = a.output.clone().unwrap_or_else(|| ctx.out.join("report.json"));
    write_json(&out, &json!({"config_hash": ctx.config_hash, "sections": sections}))?;
    println!("merged {} reports into {}", sections.len(), out.display());
    Ok(())
}
