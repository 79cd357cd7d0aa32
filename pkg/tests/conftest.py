"""Shared fixtures."""

import numpy as np
import pytest

from pydlnn.network import Architecture, TrainingInstance


@pytest.fixture
def small_arch():
    """W_1 is 1x2 and W_2 is 2x1, trained on two data points."""
    return Architecture.parse("H=1,m=2,dx=2,dy=2,d=1")


@pytest.fixture
def small_instance():
    """Data and (partly negative) regularization for ``small_arch``."""
    return TrainingInstance(
        X=np.array([[1.0, 2.0], [3.0, 4.0]]),
        Y=np.array([[1.0, 3.0], [2.0, 4.0]]),
        lambdas=[np.array([[4.0, -3.0]]), np.array([[-2.0], [5.0]])],
    )
