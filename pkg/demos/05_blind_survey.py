"""Blind survey workflow, end to end
===================================

Assembles a seeded 20-item survey (10 real, 10 synthetic, shuffled),
persists it as a self-contained bundle, simulates two raters with
different skill, and runs the accuracy table and Chi-squared analysis on
the response log. 50% accuracy means the raters could not tell the sets
apart.
"""

import json
from pathlib import Path

import numpy as np

from synthct_eval import (
    accuracy_breakdown,
    load_survey_log,
    make_survey,
    persist_survey,
    survey_stats,
)
from synthct_eval.surveyservice import SurveyStore

from phantom import phantom_set

real = phantom_set("survey-real", "real", n_volumes=2, n_slices=15, seed=21)
synth = phantom_set("survey-synth", "synthetic", n_volumes=2, n_slices=15, seed=22, noise_hu=120.0)

defn = make_survey(real, synth, n_real=10, n_synth=10, seed=7)
data_dir = Path("demo-output/surveys")
persist_survey(defn, data_dir)
print(f"survey {defn.survey_id}: {len(defn.items)} items -> {data_dir / defn.survey_id}")

# simulate raters straight through the store (the HTTP service wraps this;
# see `synthct-eval survey serve` and the browser client)
store = SurveyStore(data_dir)
survey = store.surveys[defn.survey_id]
rng = np.random.default_rng(0)
for rater, skill in [("guessing-rater", 0.5), ("sharp-rater", 0.85)]:
    for item in defn.items:
        truthful = {"real": 1, "synthetic": 0}[item.truth]
        judgment = truthful if rng.uniform() < skill else 1 - truthful
        store.append_response(survey, rater, item.item_id, judgment, rationale=None)

records = load_survey_log(survey.log_path, survey.truth_path)
print(f"\n{len(records)} responses logged")
print("accuracy:", json.dumps(accuracy_breakdown(records)))
for test in survey_stats(records)["tests"]:
    print(f"chi-squared ({test['mode']:11s}): statistic={test['statistic']:.4f} "
          f"dof={test['dof']} p={test['p_value']:.4f}")
