"""
How fast is ROI selection?
==========================

Times each stage on synthetic 640x480 rooms at lattice strides 8 and 16.
Doubling the stride leaves a quarter of the anchors, and window generation
plus filtering should shrink with them.
"""
from rgbdhuman import synth
from rgbdhuman.cli import bench
from rgbdhuman.pipeline import PipelineConfig

frames = [synth.render(synth.random_scene(i, wall_z_m=6.0)).depth for i in range(10)]
rows = bench(frames, PipelineConfig(intrinsics=synth.KINECT), strides=[8, 16], repeats=3)
for r in rows:
    print(f"stride {r['stride']:2d}: {r['anchors_per_frame']:6.0f} anchors, "
          f"{r['proposals_per_frame']:6.0f} proposals | GPD {r['gpd_ms']:.2f} ms, "
          f"SIS+CPF {r['sis_cpf_ms']:.2f} ms, whole ROI {r['roi_ms']:.2f} ms")
r8, r16 = rows
print(f"anchors x{r8['anchors_per_frame'] / r16['anchors_per_frame']:.2f}, "
      f"SIS+CPF time x{r8['sis_cpf_ms'] / r16['sis_cpf_ms']:.2f}")
