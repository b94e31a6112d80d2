"""
ベースライン - 最尤推定とブートストラップ区間
"""
