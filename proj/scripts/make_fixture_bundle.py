#!/usr/bin/env python3
# Copyright 2026 The medzs Authors
# SPDX-License-Identifier: Apache-2.0
"""Build the small CLIP-architecture encoder bundle used by the test suites.

The bundle has the exact layout a full checkpoint export produces (two ONNX
graphs, BPE merges, preprocessing constants, asset manifest, golden fixtures)
but is randomly initialised from a fixed seed so it can be committed and
regenerated without network access.

Reference outputs are produced here by independent Python code paths:
  * token ids      - a port of the original CLIP SimpleTokenizer (minus ftfy)
  * tensors        - PIL + torchvision, the reference CLIP preprocessing
  * embeddings     - PyTorch eager forward of the exported modules

Usage: make_fixture_bundle.py --out assets/tiny-clip --fixtures tests/fixtures
"""

import argparse
import collections
import gzip
import hashlib
import html
import io
import json
import os
import struct
import sys

import numpy as np
import regex as re
import torch
import torch.nn as nn
from PIL import Image
from torchvision.transforms import (CenterCrop, Compose, InterpolationMode,
                                    Normalize, Resize, ToTensor)

SEED = 20230401
CONTEXT_LENGTH = 77
NUM_MERGES = 3000
MEAN = (0.48145466, 0.4578275, 0.40821073)
STD = (0.26862954, 0.26130258, 0.27577711)

PAT = re.compile(
    r"""<\|startoftext\|>|<\|endoftext\|>|'s|'t|'re|'ve|'m|'ll|'d|[\p{L}]+|[\p{N}]|[^\s\p{L}\p{N}]+""",
    re.IGNORECASE)

# --------------------------------------------------------------------------
# Tokenizer


def bytes_to_unicode():
    bs = list(range(ord("!"), ord("~") + 1)) + list(range(ord("¡"), ord("¬") + 1)) + \
        list(range(ord("®"), ord("ÿ") + 1))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, [chr(c) for c in cs]))


def clean(text):
    text = html.unescape(html.unescape(text)).strip()
    text = re.sub(r"\s+", " ", text).strip()
    return text.lower()


CORPUS_SEED_PHRASES = [
    "No visible cavities or consolidations", "Absence of pleural effusions",
    "Clear and distinct lung borders", "Normal heart size and shape",
    "Symmetrical lung fields", "Sharp costophrenic angles",
    "Upper lobe infiltrates", "Cavitation in the upper lobes",
    "Hilar lymphadenopathy", "Miliary nodules throughout both lungs",
    "Pleural effusion", "Fibrotic scarring and volume loss",
    "Air bronchogram sign", "Lobar consolidation", "Patchy opacities",
    "Interstitial infiltrates", "Blunted costophrenic angle",
    "Venous beading and loops", "Neovascularization", "Microaneurysms",
    "Dot and blot hemorrhages", "Hard exudates", "Cotton wool spots",
    "Fibrous proliferation", "Tractional retinal detachment",
    "Vitreous hemorrhage", "Intraretinal microvascular abnormalities",
    "Macular edema", "Preretinal hemorrhage", "Normal optic disc",
    "Clear retinal vessels", "No Diabetic Retinopathy",
    "Mild Nonproliferative Retinopathy", "Moderate Nonproliferative Retinopathy",
    "Severe Nonproliferative Retinopathy", "Proliferative Retinopathy",
    "Normal lungs", "Tuberculosis", "Pneumonia", "Normal", "Abnormal",
    "Absence of calcifications", "Homogeneous contrast enhancement",
    "Restricted diffusion on MRI", "Glioblastoma multiforme",
    "Primary Central Nervous System Lymphoma",
    "Q: According to published literature, what are useful medical visual "
    "features for distinguishing the diagnostic category in a photo?",
    "a photo of a chest x-ray", "a radiograph showing the lungs",
]


def training_corpus():
    texts = list(CORPUS_SEED_PHRASES)
    for mod in (argparse, collections, json, io, os, hashlib, gzip, struct):
        if mod.__doc__:
            texts.append(mod.__doc__)
        for name in dir(mod):
            doc = getattr(getattr(mod, name), "__doc__", None)
            if isinstance(doc, str):
                texts.append(doc)
    return texts


def train_bpe(texts, num_merges):
    byte_encoder = bytes_to_unicode()
    counts = collections.Counter()
    for t in texts:
        for tok in re.findall(PAT, clean(t)):
            chars = [byte_encoder[b] for b in tok.encode("utf-8")]
            chars[-1] = chars[-1] + "</w>"
            counts[tuple(chars)] += 1
    words = dict(counts)
    merges = []
    for _ in range(num_merges):
        pairs = collections.Counter()
        for w, c in words.items():
            for a, b in zip(w, w[1:]):
                pairs[(a, b)] += c
        if not pairs:
            break
        best = max(pairs.items(), key=lambda kv: (kv[1], [-ord(ch) for ch in kv[0][0] + " " + kv[0][1]]))[0]
        if pairs[best] < 2:
            break
        merges.append(best)
        new_words = {}
        for w, c in words.items():
            out = []
            i = 0
            while i < len(w):
                if i < len(w) - 1 and (w[i], w[i + 1]) == best:
                    out.append(w[i] + w[i + 1])
                    i += 2
                else:
                    out.append(w[i])
                    i += 1
            new_words[tuple(out)] = new_words.get(tuple(out), 0) + c
        words = new_words
    return merges


class SimpleTokenizer:
    """Port of the reference CLIP tokenizer over an arbitrary merges list."""

    def __init__(self, merges):
        self.byte_encoder = bytes_to_unicode()
        vocab = list(self.byte_encoder.values())
        vocab = vocab + [v + "</w>" for v in vocab]
        for m in merges:
            vocab.append("".join(m))
        vocab.extend(["<|startoftext|>", "<|endoftext|>"])
        self.encoder = dict(zip(vocab, range(len(vocab))))
        self.bpe_ranks = dict(zip(merges, range(len(merges))))
        self.cache = {"<|startoftext|>": "<|startoftext|>", "<|endoftext|>": "<|endoftext|>"}

    def bpe(self, token):
        if token in self.cache:
            return self.cache[token]
        word = tuple(token[:-1]) + (token[-1] + "</w>",)
        pairs = set(zip(word, word[1:]))
        if not pairs:
            return token + "</w>"
        while True:
            bigram = min(pairs, key=lambda pair: self.bpe_ranks.get(pair, float("inf")))
            if bigram not in self.bpe_ranks:
                break
            first, second = bigram
            new_word = []
            i = 0
            while i < len(word):
                try:
                    j = word.index(first, i)
                    new_word.extend(word[i:j])
                    i = j
                except ValueError:
                    new_word.extend(word[i:])
                    break
                if word[i] == first and i < len(word) - 1 and word[i + 1] == second:
                    new_word.append(first + second)
                    i += 2
                else:
                    new_word.append(word[i])
                    i += 1
            word = tuple(new_word)
            if len(word) == 1:
                break
            pairs = set(zip(word, word[1:]))
        word = " ".join(word)
        self.cache[token] = word
        return word

    def encode(self, text):
        ids = []
        for token in re.findall(PAT, clean(text)):
            token = "".join(self.byte_encoder[b] for b in token.encode("utf-8"))
            ids.extend(self.encoder[t] for t in self.bpe(token).split(" "))
        return ids

    def tokenize(self, text, pad_id=0):
        sot = self.encoder["<|startoftext|>"]
        eot = self.encoder["<|endoftext|>"]
        ids = [sot] + self.encode(text) + [eot]
        if len(ids) > CONTEXT_LENGTH:
            ids = ids[:CONTEXT_LENGTH]
            ids[-1] = eot
        return ids + [pad_id] * (CONTEXT_LENGTH - len(ids))


# --------------------------------------------------------------------------
# Model (same module structure as the public CLIP implementation)


class QuickGELU(nn.Module):
    def forward(self, x):
        return x * torch.sigmoid(1.702 * x)


class ResidualAttentionBlock(nn.Module):
    def __init__(self, d_model, n_head, attn_mask=None):
        super().__init__()
        self.attn = nn.MultiheadAttention(d_model, n_head)
        self.ln_1 = nn.LayerNorm(d_model)
        self.mlp = nn.Sequential(collections.OrderedDict([
            ("c_fc", nn.Linear(d_model, d_model * 4)),
            ("gelu", QuickGELU()),
            ("c_proj", nn.Linear(d_model * 4, d_model)),
        ]))
        self.ln_2 = nn.LayerNorm(d_model)
        self.attn_mask = attn_mask

    def attention(self, x):
        mask = self.attn_mask.to(dtype=x.dtype) if self.attn_mask is not None else None
        return self.attn(x, x, x, need_weights=False, attn_mask=mask)[0]

    def forward(self, x):
        x = x + self.attention(self.ln_1(x))
        x = x + self.mlp(self.ln_2(x))
        return x


class Transformer(nn.Module):
    def __init__(self, width, layers, heads, attn_mask=None):
        super().__init__()
        self.resblocks = nn.Sequential(*[ResidualAttentionBlock(width, heads, attn_mask) for _ in range(layers)])

    def forward(self, x):
        return self.resblocks(x)


class VisionTransformer(nn.Module):
    def __init__(self, input_resolution, patch_size, width, layers, heads, output_dim):
        super().__init__()
        self.conv1 = nn.Conv2d(3, width, kernel_size=patch_size, stride=patch_size, bias=False)
        scale = width ** -0.5
        grid = input_resolution // patch_size
        self.class_embedding = nn.Parameter(scale * torch.randn(width))
        self.positional_embedding = nn.Parameter(scale * torch.randn(grid ** 2 + 1, width))
        self.ln_pre = nn.LayerNorm(width)
        self.transformer = Transformer(width, layers, heads)
        self.ln_post = nn.LayerNorm(width)
        self.proj = nn.Parameter(scale * torch.randn(width, output_dim))

    def forward(self, x):
        x = self.conv1(x)
        x = x.reshape(x.shape[0], x.shape[1], -1)
        x = x.permute(0, 2, 1)
        cls = self.class_embedding.to(x.dtype) + torch.zeros(x.shape[0], 1, x.shape[-1], dtype=x.dtype)
        x = torch.cat([cls, x], dim=1)
        x = x + self.positional_embedding.to(x.dtype)
        x = self.ln_pre(x)
        x = x.permute(1, 0, 2)
        x = self.transformer(x)
        x = x.permute(1, 0, 2)
        x = self.ln_post(x[:, 0, :])
        return x @ self.proj


class TextTransformer(nn.Module):
    def __init__(self, vocab_size, width, layers, heads, output_dim):
        super().__init__()
        mask = torch.empty(CONTEXT_LENGTH, CONTEXT_LENGTH)
        mask.fill_(float("-inf"))
        mask.triu_(1)
        self.transformer = Transformer(width, layers, heads, attn_mask=mask)
        self.token_embedding = nn.Embedding(vocab_size, width)
        self.positional_embedding = nn.Parameter(torch.empty(CONTEXT_LENGTH, width))
        self.ln_final = nn.LayerNorm(width)
        self.text_projection = nn.Parameter(torch.empty(width, output_dim))
        nn.init.normal_(self.token_embedding.weight, std=0.02)
        nn.init.normal_(self.positional_embedding, std=0.01)
        nn.init.normal_(self.text_projection, std=width ** -0.5)

    def forward(self, text):
        x = self.token_embedding(text)
        x = x + self.positional_embedding
        x = x.permute(1, 0, 2)
        x = self.transformer(x)
        x = x.permute(1, 0, 2)
        x = self.ln_final(x)
        x = x[torch.arange(x.shape[0]), text.argmax(dim=-1)] @ self.text_projection
        return x


def perturb_layernorms(module, gen):
    for m in module.modules():
        if isinstance(m, nn.LayerNorm):
            with torch.no_grad():
                m.weight.add_(0.1 * torch.randn(m.weight.shape, generator=gen))
                m.bias.add_(0.05 * torch.randn(m.bias.shape, generator=gen))


# --------------------------------------------------------------------------
# Export


def export_onnx(module, args, path, input_name, output_name):
    # The TorchScript exporter serialises the ModelProto in C++; the Python
    # `onnx` package is only needed to splice in onnxscript functions, which
    # these graphs never contain.
    from torch.onnx._internal.torchscript_exporter import onnx_proto_utils
    onnx_proto_utils._add_onnxscript_fn = lambda model_bytes, custom_opsets: model_bytes
    torch.onnx.export(module, args, path, dynamo=False, opset_version=17,
                      input_names=[input_name], output_names=[output_name],
                      dynamic_axes={input_name: {0: "batch"}, output_name: {0: "batch"}},
                      do_constant_folding=True)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        h.update(f.read())
    return h.hexdigest()


def reference_preprocess(path, size=224):
    tf = Compose([
        Resize(size, interpolation=InterpolationMode.BICUBIC),
        CenterCrop(size),
        lambda im: im.convert("RGB"),
        ToTensor(),
        Normalize(MEAN, STD),
    ])
    with Image.open(path) as im:
        return tf(im.convert("RGB"))


def write_f32(path, array):
    np.asarray(array, dtype="<f4").tofile(path)


def make_images(fixtures_dir, rng):
    img_dir = os.path.join(fixtures_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    out = {}

    # Photo-like RGB JPEG, landscape, larger than 224 on the short side.
    h, w = 300, 400
    yy, xx = np.mgrid[0:h, 0:w]
    rgb = np.stack([
        128 + 100 * np.sin(xx / 23.0) * np.cos(yy / 31.0),
        128 + 90 * np.cos((xx + yy) / 40.0),
        (xx * 255.0 / w) * 0.6 + (yy * 255.0 / h) * 0.4,
    ], axis=-1) + rng.normal(0, 12, (h, w, 3))
    rgb = np.clip(rgb, 0, 255).astype(np.uint8)
    p = os.path.join(img_dir, "golden_photo.jpg")
    Image.fromarray(rgb, "RGB").save(p, quality=90)
    out["golden_photo.jpg"] = p

    # Grayscale X-ray-like PNG, 448x336 (width x height).
    h, w = 336, 448
    yy, xx = np.mgrid[0:h, 0:w]
    cx1, cx2, cy = w * 0.32, w * 0.68, h * 0.5
    lungs = np.exp(-(((xx - cx1) / 70.0) ** 2 + ((yy - cy) / 120.0) ** 2)) + \
        np.exp(-(((xx - cx2) / 70.0) ** 2 + ((yy - cy) / 120.0) ** 2))
    ribs = 0.15 * (np.sin(yy / 9.0) > 0.6)
    gray = 200 - 150 * lungs + 60 * ribs + rng.normal(0, 6, (h, w))
    gray = np.clip(gray, 0, 255).astype(np.uint8)
    p = os.path.join(img_dir, "golden_xray.png")
    Image.fromarray(gray, "L").save(p)
    out["golden_xray.png"] = p

    # Small portrait RGB PNG, upsampled on load.
    h, w = 150, 100
    small = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
    small[40:110, 20:80] = (30, 200, 90)
    p = os.path.join(img_dir, "golden_small.png")
    Image.fromarray(small, "RGB").save(p)
    out["golden_small.png"] = p

    # Image whose pixels all equal the rounded per-channel mean.
    mean8 = tuple(int(round(m * 255)) for m in MEAN)
    flat = np.zeros((224, 224, 3), dtype=np.uint8)
    flat[:, :] = mean8
    p = os.path.join(img_dir, "mean_color.png")
    Image.fromarray(flat, "RGB").save(p)

    # Twenty-image set for pipeline/baseline identity checks.
    set_dir = os.path.join(fixtures_dir, "images", "set20")
    os.makedirs(set_dir, exist_ok=True)
    for i in range(20):
        hh = int(rng.integers(48, 120))
        ww = int(rng.integers(48, 120))
        base = rng.integers(0, 256, 3)
        arr = np.clip(base + rng.normal(0, 40, (hh, ww, 3)), 0, 255).astype(np.uint8)
        if i % 3 == 0:
            arr = arr.mean(axis=2).astype(np.uint8)
            Image.fromarray(arr, "L").save(os.path.join(set_dir, f"img_{i:02d}.png"))
        else:
            Image.fromarray(arr, "RGB").save(os.path.join(set_dir, f"img_{i:02d}.png"))

    with open(os.path.join(img_dir, "corrupt.png"), "wb") as f:
        f.write(b"\x89PNG\r\n\x1a\n" + b"not really a png" * 4)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--fixtures", required=True)
    ap.add_argument("--embed-dim", type=int, default=128)
    args = ap.parse_args()

    torch.manual_seed(SEED)
    gen = torch.Generator().manual_seed(SEED + 1)
    rng = np.random.default_rng(SEED)
    os.makedirs(args.out, exist_ok=True)
    os.makedirs(args.fixtures, exist_ok=True)

    merges = train_bpe(training_corpus(), NUM_MERGES)
    tok = SimpleTokenizer(merges)
    merges_path = os.path.join(args.out, "bpe_merges.txt")
    with open(merges_path, "w", encoding="utf-8") as f:
        f.write("#version: 0.2 medzs-tiny\n")
        for a, b in merges:
            f.write(f"{a} {b}\n")
    vocab_size = len(tok.encoder)

    visual = VisionTransformer(224, 32, 64, 2, 4, args.embed_dim).eval()
    text = TextTransformer(vocab_size, 64, 2, 4, args.embed_dim).eval()
    perturb_layernorms(visual, gen)
    perturb_layernorms(text, gen)

    vis_path = os.path.join(args.out, "visual.onnx")
    txt_path = os.path.join(args.out, "text.onnx")
    with torch.no_grad():
        export_onnx(visual, (torch.randn(2, 3, 224, 224),), vis_path, "pixel_values", "image_embeds")
        export_onnx(text, (torch.tensor([tok.tokenize("a"), tok.tokenize("b c")]),), txt_path,
                    "input_ids", "text_embeds")

    manifest = {
        "format_version": 1,
        "name": "tiny-clip-vit-b32-arch",
        "description": "Randomly initialised CLIP-architecture bundle (ViT, patch 32) for tests",
        "embedding_dim": args.embed_dim,
        "visual": {"file": "visual.onnx", "input": "pixel_values", "output": "image_embeds",
                   "sha256": sha256_file(vis_path)},
        "text": {"file": "text.onnx", "input": "input_ids", "output": "text_embeds",
                 "sha256": sha256_file(txt_path)},
        "tokenizer": {"merges": "bpe_merges.txt", "sha256": sha256_file(merges_path),
                      "context_length": CONTEXT_LENGTH, "pad_id": 0},
        "preprocess": {"image_size": 224, "resize": "bicubic", "mean": list(MEAN), "std": list(STD)},
    }
    with open(os.path.join(args.out, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")

    # Golden fixtures --------------------------------------------------------
    golden_dir = os.path.join(args.fixtures, "golden")
    os.makedirs(golden_dir, exist_ok=True)
    images = make_images(args.fixtures, rng)

    strings = [
        "", "Pleural effusion", "No visible cavities or consolidations",
        "Absence of pleural effusions", "Venous beading and loops",
        "Tuberculosis", "Normal lungs", "Restricted diffusion on MRI",
        "  Multiple   spaces,\tpunctuation!!! and CAPS ",
        "it's what they'll do & <b>markup</b> &amp; 42 numbers 3.14",
        "xylophone quokka zebra unseenword",
        " ".join(["pneumonia"] * 1000),
    ]
    golden = {"strings": [], "images": [], "text_embeddings": []}
    for s in strings:
        golden["strings"].append({"text": s, "ids": tok.tokenize(s)})

    with torch.no_grad():
        for name, path in sorted(images.items()):
            tensor = reference_preprocess(path)
            tensor_file = name.rsplit(".", 1)[0] + ".tensor.f32"
            write_f32(os.path.join(golden_dir, tensor_file), tensor.numpy())
            emb = visual(tensor.unsqueeze(0))[0]
            golden["images"].append({
                "image": "images/" + name,
                "tensor": "golden/" + tensor_file,
                "shape": list(tensor.shape),
                "embedding": emb.tolist(),
            })
        for s in ["Pleural effusion", "No visible cavities or consolidations", "Tuberculosis"]:
            ids = torch.tensor([tok.tokenize(s)])
            golden["text_embeddings"].append({"text": s, "embedding": text(ids)[0].tolist()})

    with open(os.path.join(golden_dir, "golden.json"), "w") as f:
        json.dump(golden, f, indent=1)
        f.write("\n")
    print(f"vocab={vocab_size} merges={len(merges)} d={args.embed_dim}")


if __name__ == "__main__":
    sys.exit(main())
