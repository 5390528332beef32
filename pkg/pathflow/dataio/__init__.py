"""Slide ingestion: manifests, rasters, tissue masks, patches, synthetic corpus"""

from pathflow.dataio.manifest import (
    MANIFEST_COLUMNS,
    Grade,
    Sex,
    SlideRecord,
    Subtype,
    molecular_subtype,
    load_manifest,
    write_manifest,
    resolve_image_path,
)
from pathflow.dataio.raster import ImageRaster, decode_image, encode_image
from pathflow.dataio.tissue import tissue_mask
from pathflow.dataio.patches import PatchSet, extract_patches
from pathflow.dataio.patch_cache import read_patch_set, write_patch_set
from pathflow.dataio.synth import CorpusSpec, SynthCorpus, synth_corpus

__all__ = [
    "MANIFEST_COLUMNS",
    "Grade",
    "Sex",
    "SlideRecord",
    "Subtype",
    "molecular_subtype",
    "load_manifest",
    "write_manifest",
    "resolve_image_path",
    "ImageRaster",
    "decode_image",
    "encode_image",
    "tissue_mask",
    "PatchSet",
    "extract_patches",
    "read_patch_set",
    "write_patch_set",
    "CorpusSpec",
    "SynthCorpus",
    "synth_corpus",
]
