# Copyright 2026 The attnseg Authors. All Rights Reserved.
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

# Regenerates the exporter-format fixtures with numpy.
import json

import numpy as np

rng = np.random.default_rng(7)
entries = []
for i in range(4):
    image_id = f"img{i}"
    mask = np.zeros((28, 28), dtype=np.uint8)
    mask[:, 14:] = 1
    if i % 2:
        mask = mask.T.copy()
    mask[0, 0] = 255
    logits = rng.normal(size=(1 + 196, 12))
    # CLS-to-patch attention on a 14x14 grid, one channel per head.
    tokens = np.zeros((14, 14))
    tokens[:, 7:] = 3.0
    if i % 2:
        tokens = tokens.T
    logits[1:, :] += tokens.reshape(196, 1)
    attn = np.exp(logits) / np.exp(logits).sum(axis=0, keepdims=True)
    heads = attn[1:].reshape(14, 14, 12).astype("<f4")
    np.save(f"{image_id}.mask.npy", mask)
    np.save(f"{image_id}.pathdino.npy", heads)
    np.save(f"{image_id}.gray.npy", heads[:, :, 0].copy())
    entries.append({
        "id": image_id,
        "mask": f"{image_id}.mask.npy",
        "features": {"pathdino": f"{image_id}.pathdino.npy",
                     "gray": f"{image_id}.gray.npy"},
        "split": "test" if i == 3 else "train",
    })

with open("fragment.json", "w") as f:
    json.dump({"entries": entries}, f, indent=2)
    f.write("\n")
