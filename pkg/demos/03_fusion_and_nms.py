"""
Trusting depth up close and colour far away
===========================================

Colour and depth classifiers each give a probability per window. The fused
probability leans on depth within 1 m and on colour beyond 6 m, with a
linear hand-over in between.
"""
from rgbdhuman.fusion import ScoredProposal, fuse, nms, weight
from rgbdhuman.roi import Proposal

print(" d [m]  weight  fused(p_c=0.3, p_d=0.9)")
for d in (0.5, 1.0, 2.0, 3.5, 5.0, 6.0, 8.0):
    w = weight(d)
    print(f"{d:6.1f}  {w:6.2f}  {fuse(0.3, 0.9, w):.3f}")

# agreeing scores are left alone whatever the weight
print("fuse(0.7, 0.7, w) for w = 0, 0.5, 1:", [round(fuse(0.7, 0.7, w), 12) for w in (0, .5, 1)])

# Greedy NMS keeps the best window and drops heavy overlaps with it.
a = ScoredProposal(Proposal(0, 0, 20, 2.0), .9, .9, .9)
b = ScoredProposal(Proposal(5, 0, 20, 2.0), .8, .8, .8)   # IoU 0.6 with a
c = ScoredProposal(Proposal(16, 0, 20, 2.0), .7, .7, .7)  # IoU 0.11 with a
for thr in (0.05, 0.3, 0.7):
    kept = nms([a, b, c], iou_threshold=thr)
    print(f"IoU threshold {thr}: keeps x =", [k.proposal.x for k in kept])
