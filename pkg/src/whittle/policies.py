from src.core.types import GOOD
from src.whittle.index import WhittleIndexTable, argmax_lowest


def threshold_whittle_next(lambda_star, table, beliefs):
    """Exploit a (g,1) arm whose index clears λ*, else play the largest current index."""
    for i, belief in enumerate(beliefs):
        if belief.last == GOOD and belief.t == 1 and table.index_g1[i] >= lambda_star:
            return i
    return argmax_lowest(table.indices(beliefs))


def plain_whittle_next(table, beliefs):
    """Play the arm with the largest Whittle index, lowest id on ties."""
    return argmax_lowest(table.indices(beliefs))


class ThresholdWhittlePolicy:
    name = "threshold-whittle"

    def __init__(self, arms, lambda_star, table=None):
        self.lambda_star = lambda_star
        self.table = table or WhittleIndexTable(arms)

    def next_action(self, beliefs):
        return threshold_whittle_next(self.lambda_star, self.table, beliefs)

    def required_ages(self):
        return [1] * len(self.table.arms)


class WhittleIndexPolicy:
    name = "plain-whittle"

    def __init__(self, arms, table=None):
        self.table = table or WhittleIndexTable(arms)

    def next_action(self, beliefs):
        return plain_whittle_next(self.table, beliefs)

    def required_ages(self):
        return [1] * len(self.table.arms)
