"""Project world points through the unified wide-angle model.

Shows how the xi parameter bends rays that a pinhole model would clip or
distort, and checks the analytic Jacobian against finite differences on
one point.
"""

import numpy as np

from trajkit.core import CameraModel
from trajkit.projection import project, projection_jacobian


def main():
    pinhole = CameraModel(600, 600, 640, 360, xi=0.0, k1=0.0, k2=0.0,
                          width=1280, height=720)
    fisheye = CameraModel(600, 600, 640, 360, xi=1.0, k1=0.1, k2=0.0,
                          width=1280, height=720)

    print("point -> pinhole px | wide-angle px")
    for x in (0.0, 2.0, 6.0, 12.0, 25.0):
        p = np.array([x, 1.0, 10.0])
        up, okp = project(pinhole, p)
        uf, okf = project(fisheye, p)
        marker = "" if okp else "   (outside pinhole frame)"
        print(f"  ({x:5.1f}, 1, 10)  ({up[0]:8.1f}, {up[1]:6.1f})"
              f" | ({uf[0]:7.1f}, {uf[1]:6.1f}){marker}")

    # worked check: the xi=1 model keeps extreme off-axis points on-sensor
    p = np.array([25.0, 1.0, 10.0])
    _, ok = project(fisheye, p)
    print(f"\n68 deg off-axis point in wide-angle frame: {ok}")

    p = np.array([3.0, 4.0, 12.0])
    J = projection_jacobian(fisheye, p)
    h = 1e-6
    J_fd = np.empty((2, 3))
    for j in range(3):
        dp = np.zeros(3)
        dp[j] = h
        J_fd[:, j] = (project(fisheye, p + dp)[0] - project(fisheye, p - dp)[0]) / (2 * h)
    rel = np.linalg.norm(J - J_fd) / np.linalg.norm(J_fd)
    print(f"Jacobian at (3,4,12):\n{np.array_str(J, precision=4)}")
    print(f"relative difference vs central differences: {rel:.2e}")


if __name__ == "__main__":
    main()
