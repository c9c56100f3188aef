"""Pure-Python/numpy fallback for the compiled kernel."""
import numpy as np


def spsa_fold(theta0, intensities, means, dispersions, currents, start_iteration, control_idx):
    theta = np.array(theta0, dtype=np.float64, copy=True)
    control_idx = np.asarray(control_idx, dtype=np.intp)
    trace = np.empty((currents.shape[0], control_idx.shape[0]), dtype=np.float64)
    for i in range(currents.shape[0]):
        intensity = intensities[i]
        iteration = np.float64(start_iteration + i + 1)
        gain = (intensity - means[i]) / (dispersions[i] * iteration)
        theta = theta - gain * (intensity * theta - currents[i])
        trace[i] = theta[control_idx]
    return theta, trace
