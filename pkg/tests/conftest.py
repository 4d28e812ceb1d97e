from __future__ import annotations

import pytest

from dgdlab import five_agent_quartic


@pytest.fixture(scope="session")
def five_agent():
    """The bundled 5-agent quartic benchmark problem."""
    return five_agent_quartic()
