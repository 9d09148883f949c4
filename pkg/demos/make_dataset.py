"""Generate a small labeled siren dataset and check what it wrote.

Uses the bundled dataset config with the item count cut down to 10. Each
item's SNR is re-measured from the debug stems, and a second generation with
the same seed is compared byte for byte.

    python3 demos/make_dataset.py [out_dir]
"""
import filecmp
import sys
import tempfile
from pathlib import Path

import roadsim
from roadsim.config import DatasetConfig, load_config
from roadsim.datagen import generate_dataset, measured_snr
from roadsim.wavio import wav_read

data = Path(roadsim.__file__).parent / "data"
cfg = load_config(DatasetConfig, data / "siren_dataset.yaml").model_copy(update={"count": 10})
spec = cfg.to_spec(data)

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="roadsim-"))
records = generate_dataset(spec, out / "run1", debug=True)
generate_dataset(spec, out / "run2", debug=True)

print(f"{'id':>3} {'label':7} {'snr':>7} {'measured':>8} {'onset':>6} {'offset':>6}")
for r in records:
    stems = out / "run1" / "stems"
    event, _ = wav_read(stems / f"{r.item_id:06d}_event.wav")
    noise, _ = wav_read(stems / f"{r.item_id:06d}_noise.wav")
    print(f"{r.item_id:3d} {r.label:7} {r.snr_db:7.2f} {measured_snr(event, noise):8.2f} "
          f"{r.onset:6.2f} {r.offset:6.2f}")

cmp = filecmp.dircmp(out / "run1" / "audio", out / "run2" / "audio")
same = filecmp.cmp(out / "run1" / "manifest.jsonl", out / "run2" / "manifest.jsonl", shallow=False)
_, mismatch, errors = filecmp.cmpfiles(out / "run1" / "audio", out / "run2" / "audio",
                                       cmp.common_files, shallow=False)
print(f"second run identical: {same and not mismatch and not errors}  (output in {out})")
