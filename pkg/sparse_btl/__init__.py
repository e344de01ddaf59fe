"""
sparse_btl：带协变量与稀疏内在得分的 BTL 成对比较模型

惩罚极大似然估计、去偏推断、拟合优度检验与样本外排名置信区间。
"""

__version__ = "0.1.0"
