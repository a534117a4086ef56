#!/usr/bin/env python3
# Copyright 2026 The sparseseq Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates the sample corpora under data/ from the Pattern 3.0 sdist.

The sdist (pattern3-3.0.0.tar.gz on PyPI) bundles two Project Gutenberg
texts by Lewis Carroll (public domain) and a Penn-tagged sample of the Open
American National Corpus. Usage:

    pip download --no-deps --no-binary :all: pattern3==3.0.0
    python3 scripts/prepare_corpora.py pattern3-3.0.0.tar.gz data/

Requires pypdf for the Alice text.
"""

import argparse
import io
import re
import tarfile
import zipfile

CORPORA = "pattern3-3.0.0/test/corpora/"

_PUNCT = re.compile(r"([.,;:!?()\"*\[\]]|--|'(?=\s|$)|(?<=\s)')")


def _normalize(text):
    for a, b in (("‘", "'"), ("’", "'"), ("“", '"'),
                 ("”", '"'), ("–", " -- "), ("—", " -- "),
                 ("ﬂ", "fl"), ("ﬁ", "fi"), ("&apos;", "'"),
                 ("&quot;", '"'), ("&amp;", "&")):
        text = text.replace(a, b)
    return text


def _tokenize_lines(paragraphs):
    """Lower-cased, punctuation-split sentences, one per output line."""
    out = []
    for para in paragraphs:
        para = " " + _normalize(para).lower() + " "
        para = _PUNCT.sub(r" \1 ", para)
        toks = para.split()
        sent = []
        for t in toks:
            sent.append(t)
            if t in (".", "!", "?"):
                out.append(" ".join(sent))
                sent = []
        if sent:
            out.append(" ".join(sent))
    return out


def _alice_paragraphs(pdf_bytes):
    import pypdf
    reader = pypdf.PdfReader(io.BytesIO(pdf_bytes))
    lines = []
    for page in reader.pages:
        lines.extend(page.extract_text().splitlines())
    body = []
    started = False
    for line in lines:
        s = line.strip()
        if s == "Chapter 1":
            started = True
        if not started:
            continue
        if re.fullmatch(r"\d+", s) or re.fullmatch(r"\d+ CHAPTER \d+\..*", s):
            continue
        if re.fullmatch(r"Chapter \d+", s):
            continue
        body.append(s)
    # PDF line breaks are not paragraph breaks; sentences are re-split later.
    text = " ".join(body)
    text = re.sub(r"\b([A-Z]) ([A-Z]{2,})\b", r"\1\2", text)
    return [text]


def _lookingglass_paragraphs(docx_bytes):
    z = zipfile.ZipFile(io.BytesIO(docx_bytes))
    xml = z.read("word/document.xml").decode("utf-8")
    paras = []
    for p in re.findall(r"<w:p[ >].*?</w:p>", xml, flags=re.S):
        t = "".join(re.findall(r"<w:t[^>]*>(.*?)</w:t>", p, flags=re.S))
        if t.strip() and "Gutenberg" not in t and "By Lewis" not in t:
            paras.append(t)
    return paras


def _write_tagged(path, sentences):
    with open(path, "w", encoding="utf-8") as f:
        for sent in sentences:
            for tok, tag in sent:
                f.write(f"{tok}\t{tag}\n")
            f.write("\n")


def _oanc_sentences(raw):
    sentences = []
    for line in raw.decode("utf-8").splitlines():
        sent = []
        for item in line.split():
            tok, _, tag = item.rpartition("/")
            if tok and tag:
                sent.append((tok, tag))
        if len(sent) >= 3:
            sentences.append(sent)
    return sentences


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("sdist")
    ap.add_argument("out_dir")
    ap.add_argument("--pos-train-tokens", type=int, default=15000)
    ap.add_argument("--pos-eval-tokens", type=int, default=4000)
    args = ap.parse_args()

    with tarfile.open(args.sdist) as tar:
        pdf = tar.extractfile(CORPORA + "carroll-wonderland.pdf").read()
        docx = tar.extractfile(CORPORA + "carroll-lookingglass.docx").read()
        oanc = tar.extractfile(CORPORA + "tagged-en-oanc.txt").read()

    lines = _tokenize_lines(_alice_paragraphs(pdf))
    lines += _tokenize_lines(_lookingglass_paragraphs(docx))
    with open(f"{args.out_dir}/recite/carroll.txt", "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    ntok = sum(len(l.split()) + 1 for l in lines)
    print(f"recite corpus: {len(lines)} lines, {ntok} tokens incl. <eos>")

    sents = _oanc_sentences(oanc)
    splits = {"train": args.pos_train_tokens, "dev": args.pos_eval_tokens,
              "test": args.pos_eval_tokens}
    pos = 0
    for name, budget in splits.items():
        chunk, count = [], 0
        while count < budget and pos < len(sents):
            chunk.append(sents[pos])
            count += len(sents[pos])
            pos += 1
        _write_tagged(f"{args.out_dir}/pos/oanc.{name}.tsv", chunk)
        print(f"pos {name}: {len(chunk)} sentences, {count} tokens")


if __name__ == "__main__":
    main()
