"""
Animatable face reconstruction with expression-dependent detail.

- model_core: parametric head model geometry and the synthetic toy model
- appearance: albedo, camera, UV resampling, SH shading and rasterization
- detail: displacement decoder, detail normals and detail rendering
- losses: coarse and detail objectives, feature extractors
- pipeline: latent codes, fitting, decoder training and retargeting
- evalkit: scan-to-mesh evaluation and the landmark-consistency filter
- assets: model container and plain file formats
"""

__version__ = "0.1.0"
