"""
測定スキーム - 最適 POVM、スタビライザー、パウリ重みサンプリング、DFE
"""
