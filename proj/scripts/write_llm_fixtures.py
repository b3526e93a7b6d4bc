#!/usr/bin/env python3
# Copyright 2026 The medzs Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes the committed LLM response cache under data/cache/llm/.

The answers below are hand-authored reference texts written in the style
of a chat model's list answer. They were not captured from a live endpoint;
each entry says so in its "capture" field. Running generate-kb with a warm
cache reproduces the shipped knowledge bases without network access.
"""

import hashlib
import json
import os

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
OUT = os.path.join(ROOT, "data", "cache", "llm")

MODEL = "gpt-3.5-turbo"
CAPTURED_AT = "2026-10-16T00:00:00Z"
CAPTURE = "authored: hand-written reference answer, not captured from a live endpoint"

TEMPLATES = {
    "designed": "Q: According to published literature, what are useful medical visual features for "
                "distinguishing {Diagnostic Category} in a photo?",
    "baseline": "Q: What are useful visual features for distinguishing {Diagnostic Category} in a photo?",
}

DESIGNED = {
    "Normal lungs": """Useful medical visual features for identifying normal lungs on a chest X-ray include:

1. No visible cavities or consolidations.
2. Absence of pleural effusions.
3. Clear and distinct lung borders.
4. Sharp costophrenic angles.
5. Normal heart size and shape.
6. Symmetrical lung fields with uniform radiolucency.
7. Vascular markings that taper toward the periphery.
8. Trachea positioned in the midline.""",
    "Tuberculosis": """Published literature describes the following visual features of pulmonary tuberculosis on chest radiographs:

1. Upper lobe infiltrates.
2. Cavitation in the upper lobes.
3. Hilar lymphadenopathy.
4. Miliary nodules throughout both lungs.
5. Pleural effusion.
6. Fibrotic scarring and volume loss.
7. Calcified granulomas.
8. Tree-in-bud opacities.""",
    "Pneumonia": """Medical visual features useful for distinguishing pneumonia on a chest X-ray:

- Air bronchogram sign
- Lobar consolidation
- Patchy opacities
- Interstitial infiltrates
- Blunted costophrenic angle
- Silhouette sign obscuring the heart or diaphragm border
- Parapneumonic effusion""",
    "No Diabetic Retinopathy": """Fundus features consistent with no diabetic retinopathy:

1. Clear and healthy optic disc.
2. Normal retinal vasculature.
3. Absence of microaneurysms.
4. No retinal hemorrhages.
5. No hard exudates.
6. Uniform fundus background.""",
    "Mild Nonproliferative Retinopathy": """Features reported for mild nonproliferative diabetic retinopathy:

1. Few scattered microaneurysms.
2. Small dot hemorrhages.
3. No venous beading.
4. Intact macula.
5. Mostly normal retinal vessels.""",
    "Moderate Nonproliferative Retinopathy": """Features reported for moderate nonproliferative diabetic retinopathy:

1. Multiple microaneurysms.
2. Dot and blot hemorrhages.
3. Hard exudates.
4. Cotton wool spots.
5. Mild venous beading.""",
    "Severe Nonproliferative Retinopathy": """Visual features of severe nonproliferative diabetic retinopathy described in the literature:

- Venous beading and loops
- Neovascularization
- Extensive intraretinal hemorrhages in all four quadrants
- Intraretinal microvascular abnormalities
- Numerous cotton wool spots""",
    "Proliferative Retinopathy": """Proliferative diabetic retinopathy shows these fundus features:

• Neovascularization of the optic disc
• Neovascularization elsewhere in the retina
• Fibrous proliferation
• Tractional retinal detachment
• Vitreous hemorrhage
• Preretinal hemorrhage""",
    "Glioblastoma Multiforme": """Imaging features of glioblastoma multiforme reported in published studies:

1. Irregular ring enhancement.
2. Central necrosis.
3. Extensive peritumoral edema.
4. Mass effect and midline shift.
5. Heterogeneous signal intensity.
6. Spread across the corpus callosum in a butterfly pattern.""",
    "Primary Central Nervous System Lymphoma": """Imaging features of primary central nervous system lymphoma reported in published studies:

1. Homogeneous contrast enhancement.
2. Restricted diffusion on MRI.
3. Absence of calcifications.
4. Periventricular location.
5. Minimal necrosis.
6. Relatively mild peritumoral edema.""",
}

BASELINE = {
    "Normal lungs": """Visual features that may help distinguish normal lungs in a photo:

1. Even gray appearance on both sides of the chest.
2. Dark areas where the lungs are filled with air.
3. Ribs clearly visible.
4. Smooth outline of the chest.
5. Heart shadow in the middle.
6. No bright white patches.""",
    "Tuberculosis": """Visual features for distinguishing tuberculosis in a photo:

1) Cloudy white areas in the lungs
2) Holes or dark spots in the upper chest
3) Uneven texture across the lungs
4) Shrunken look on one side
5) Small white dots scattered around""",
    "Pneumonia": """Useful visual features for distinguishing pneumonia in a photo:

- White hazy patches in the lungs
- One side looking denser than the other
- Blurry edges around the heart
- Fluid at the bottom of the chest
- Overall cloudy appearance""",
    "No Diabetic Retinopathy": """Visual features of an eye without diabetic retinopathy:

1. Bright round optic disc.
2. Smooth orange-red background.
3. Thin, evenly spaced blood vessels.
4. No spots or stains.""",
    "Mild Nonproliferative Retinopathy": """Visual features of mild nonproliferative retinopathy in a photo:

1. A few tiny red dots.
2. Mostly normal looking retina.
3. Slightly uneven vessel color.""",
    "Moderate Nonproliferative Retinopathy": """Visual features of moderate nonproliferative retinopathy in a photo:

1. Several red spots and blotches.
2. Yellow specks on the retina.
3. Fluffy white patches.
4. Slightly wavy blood vessels.""",
    "Severe Nonproliferative Retinopathy": """Visual features of severe nonproliferative retinopathy in a photo:

1. Many red blotches across the retina.
2. Beaded looking veins.
3. Irregular small vessels.
4. Large pale areas.""",
    "Proliferative Retinopathy": """Visual features of proliferative retinopathy in a photo:

1. Tangled new blood vessels.
2. White scar-like strands.
3. Dark red areas of bleeding.
4. Blurred or hazy regions.""",
    "Glioblastoma Multiforme": """Visual features for distinguishing glioblastoma multiforme in a photo:

1. Large irregular bright ring.
2. Dark center inside the mass.
3. Swelling around the mass.
4. Brain structures pushed to one side.""",
    "Primary Central Nervous System Lymphoma": """Visual features for distinguishing primary central nervous system lymphoma in a photo:

1. Uniformly bright mass.
2. Mass located near the center of the brain.
3. Smooth, well defined edges.
4. Little swelling around the lesion.""",
}


def cache_key(template_id, category, model):
    h = hashlib.sha256()
    h.update(f"medzs-llm-cache/1\n{template_id}\n{category}\n{model}".encode("utf-8"))
    return h.hexdigest()


def main():
    os.makedirs(OUT, exist_ok=True)
    written = 0
    for template_id, answers in (("designed", DESIGNED), ("baseline", BASELINE)):
        for category, response in answers.items():
            entry = {
                "template_id": template_id,
                "category": category,
                "model": MODEL,
                "prompt": TEMPLATES[template_id].replace("{Diagnostic Category}", category),
                "response": response,
                "captured_at": CAPTURED_AT,
                "capture": CAPTURE,
            }
            path = os.path.join(OUT, cache_key(template_id, category, MODEL) + ".json")
            with open(path, "w", encoding="utf-8") as f:
                f.write(json.dumps(entry, indent=2, ensure_ascii=False) + "\n")
            written += 1
    print(f"wrote {written} cache entries to {OUT}")


if __name__ == "__main__":
    main()
