"""
ミニマックス推定 - 鞍点ソルバー、アフィン推定量、リスクの閉形式
"""
